#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "demoforge/error.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/taskspec.hpp"

namespace demoforge {

namespace {

constexpr std::array<std::pair<Relation, std::string_view>, 5> kRelationNames{{
    {Relation::On, "On"},
    {Relation::In, "In"},
    {Relation::Open, "Open"},
    {Relation::Close, "Close"},
    {Relation::TurnedOn, "TurnedOn"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(Relation relation) {
  for (const auto& [r, name] : kRelationNames)
    if (r == relation) return name;
  return "?";
}

std::optional<Relation> relation_from_string(std::string_view name) {
  for (const auto& [r, n] : kRelationNames)
    if (iequals(n, name)) return r;
  return std::nullopt;
}

std::size_t arity(Relation relation) {
  return (relation == Relation::On || relation == Relation::In) ? 2 : 1;
}

const Declaration* TaskSpec::find_object(std::string_view name) const {
  for (const auto& d : objects)
    if (d.instance_name == name) return &d;
  return nullptr;
}

const Declaration* TaskSpec::find_fixture(std::string_view name) const {
  for (const auto& d : fixtures)
    if (d.instance_name == name) return &d;
  return nullptr;
}

const Declaration* TaskSpec::find_instance(std::string_view name) const {
  if (const auto* d = find_object(name)) return d;
  return find_fixture(name);
}

const Region* TaskSpec::find_region(std::string_view name) const {
  for (const auto& r : regions)
    if (r.qualified_name() == name) return &r;
  for (const auto& r : regions)
    if (r.name == name) return &r;
  return nullptr;
}

std::string format_diagnostic(const Diagnostic& d, std::string_view file) {
  std::ostringstream out;
  if (!file.empty()) out << file << ':';
  out << d.location.line << ':' << d.location.column << ": "
      << (d.severity == Severity::error ? "error" : "warning") << " [" << d.code << "] " << d.message;
  return out.str();
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

// ---------------------------------------------------------------------------
// Canonical printer

namespace {

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

bool renders_bare(std::string_view text) {
  if (text.empty() || text.front() == ' ' || text.back() == ' ') return false;
  char prev = 'x';
  for (const char c : text) {
    if (c == ' ' && prev == ' ') return false;
    if (c == '(' || c == ')' || c == ';' || c == '"' || c == '\\' || c == '\t' || c == '\n' ||
        c == '\r' || c == '\f' || c == '\v')
      return false;
    prev = c;
  }
  return true;
}

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void render_predicate(std::ostream& out, const Predicate& p) {
  out << '(' << to_string(p.relation);
  for (const auto& a : p.args) out << ' ' << a;
  out << ')';
}

void render_declarations(std::ostream& out, std::string_view key, const std::vector<Declaration>& decls) {
  if (decls.empty()) {
    out << "  (" << key << ")\n";
    return;
  }
  out << "  (" << key << '\n';
  for (const auto& d : decls) out << "    " << d.instance_name << " - " << d.class_name << '\n';
  out << "  )\n";
}

}  // namespace

std::string render_task_spec(const TaskSpec& spec) {
  std::ostringstream out;
  out << "(define (problem " << spec.problem_name << ")\n";
  out << "  (:domain " << spec.domain_name << ")\n";
  if (!spec.language_instruction.empty()) {
    out << "  (:language "
        << (renders_bare(spec.language_instruction) ? spec.language_instruction : quote(spec.language_instruction))
        << ")\n";
  }
  if (spec.regions.empty()) {
    out << "  (:regions)\n";
  } else {
    out << "  (:regions\n";
    for (const auto& r : spec.regions) {
      out << "    (" << r.name << '\n';
      out << "      (:target " << r.parent << ")\n";
      out << "      (:ranges (\n";
      out << "        (" << format_number(r.x_min) << ' ' << format_number(r.y_min) << ' '
          << format_number(r.x_max) << ' ' << format_number(r.y_max) << ")\n";
      out << "      ))\n";
      out << "      (:yaw_rotation (\n";
      out << "        (" << format_number(r.yaw_min) << ' ' << format_number(r.yaw_max) << ")\n";
      out << "      ))\n";
      out << "    )\n";
    }
    out << "  )\n";
  }
  render_declarations(out, ":fixtures", spec.fixtures);
  render_declarations(out, ":objects", spec.objects);
  if (spec.objects_of_interest.empty()) {
    out << "  (:obj_of_interest)\n";
  } else {
    out << "  (:obj_of_interest\n";
    for (const auto& name : spec.objects_of_interest) out << "    " << name << '\n';
    out << "  )\n";
  }
  if (spec.init_conditions.empty()) {
    out << "  (:init)\n";
  } else {
    out << "  (:init\n";
    for (const auto& p : spec.init_conditions) {
      out << "    ";
      render_predicate(out, p);
      out << '\n';
    }
    out << "  )\n";
  }
  out << "  (:goal\n";
  if (spec.goal_conditions.empty()) {
    out << "    (And)\n";
  } else {
    out << "    (And\n";
    for (const auto& p : spec.goal_conditions) {
      out << "      ";
      render_predicate(out, p);
      out << '\n';
    }
    out << "    )\n";
  }
  out << "  )\n";
  out << ")\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Placement analysis shared by validate() and sample_scene().

namespace {

struct PlacementInfo {
  const Predicate* predicate = nullptr;
  const Region* region = nullptr;         // set when placed in a region
  const Declaration* support = nullptr;   // set when resting on an instance
};

bool is_placement(const Predicate& p) {
  return (p.relation == Relation::On || p.relation == Relation::In) && p.args.size() == 2;
}

struct PlacementAnalysis {
  std::map<std::string, PlacementInfo, std::less<>> placed;
  std::vector<Diagnostic> diagnostics;
  std::vector<std::string> order;  // instances with a placement, init order
};

PlacementAnalysis analyse_placements(const TaskSpec& spec) {
  PlacementAnalysis a;
  for (const auto& p : spec.init_conditions) {
    if (!is_placement(p)) continue;
    const std::string& subject = p.args[0];
    if (!spec.find_instance(subject)) continue;  // reported as UNDECLARED_OBJECT elsewhere
    PlacementInfo info;
    info.predicate = &p;
    if (const auto* support = spec.find_instance(p.args[1])) {
      info.support = support;
    } else if (const auto* region = spec.find_region(p.args[1])) {
      info.region = region;
    } else {
      continue;
    }
    if (a.placed.count(subject)) {
      a.diagnostics.push_back({Severity::error, "MULTIPLE_PLACEMENTS", p.loc,
                               "'" + subject + "' is placed by more than one init predicate"});
      continue;
    }
    a.placed.emplace(subject, info);
    a.order.push_back(subject);
  }
  // Supports must themselves be placed, and support chains must end in a region.
  for (const auto& name : a.order) {
    const PlacementInfo& info = a.placed.at(name);
    if (!info.support) continue;
    std::set<std::string, std::less<>> seen{name};
    const PlacementInfo* cur = &info;
    while (cur->support) {
      const std::string& next = cur->support->instance_name;
      if (seen.count(next)) {
        a.diagnostics.push_back({Severity::error, "PLACEMENT_CYCLE", info.predicate->loc,
                                 "placement of '" + name + "' forms a cycle"});
        break;
      }
      seen.insert(next);
      const auto it = a.placed.find(next);
      if (it == a.placed.end()) {
        a.diagnostics.push_back({Severity::error, "UNPLACED_SUPPORT", info.predicate->loc,
                                 "'" + name + "' rests on '" + next + "', which has no position"});
        break;
      }
      cur = &it->second;
    }
  }
  return a;
}

bool rectangles_overlap(const Region& a, const Region& b) {
  const bool identical =
      a.x_min == b.x_min && a.x_max == b.x_max && a.y_min == b.y_min && a.y_max == b.y_max;
  const double dx = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double dy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return identical || (dx > 0.0 && dy > 0.0);
}

}  // namespace

std::vector<Diagnostic> validate(const TaskSpec& spec, const ObjectRegistry& registry) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string code, SourceLoc loc, std::string msg) {
    out.push_back({Severity::error, std::move(code), loc, std::move(msg)});
  };
  auto warn = [&](std::string code, SourceLoc loc, std::string msg) {
    out.push_back({Severity::warning, std::move(code), loc, std::move(msg)});
  };

  std::set<std::string, std::less<>> names;
  for (const auto* decls : {&spec.fixtures, &spec.objects}) {
    for (const auto& d : *decls) {
      if (!names.insert(d.instance_name).second)
        error("DUPLICATE_INSTANCE", d.loc, "instance '" + d.instance_name + "' is declared twice");
      if (!registry.contains(d.class_name))
        error("UNKNOWN_CLASS", d.loc, "class '" + d.class_name + "' is not in the object registry");
    }
  }

  for (const auto& r : spec.regions) {
    if (r.x_min > r.x_max || r.y_min > r.y_max || r.yaw_min > r.yaw_max)
      error("INVALID_RANGE", r.loc, "region '" + r.qualified_name() + "' has min > max");
    if (!spec.find_fixture(r.parent))
      error("UNKNOWN_PARENT", r.loc, "region '" + r.name + "' targets '" + r.parent + "', which is not a fixture");
  }
  // Goal-only regions are placement targets (e.g. stacked pyramid levels) and
  // may legitimately share a footprint with other targets.
  auto referenced_by = [&](const Region& r, const std::vector<Predicate>& preds) {
    return std::any_of(preds.begin(), preds.end(), [&](const Predicate& p) {
      return std::any_of(p.args.begin(), p.args.end(),
                         [&](const std::string& a) { return a == r.qualified_name() || a == r.name; });
    });
  };
  auto goal_only = [&](const Region& r) {
    return referenced_by(r, spec.goal_conditions) && !referenced_by(r, spec.init_conditions);
  };
  for (std::size_t i = 0; i < spec.regions.size(); ++i)
    for (std::size_t j = i + 1; j < spec.regions.size(); ++j)
      if (!goal_only(spec.regions[i]) && !goal_only(spec.regions[j]) &&
          rectangles_overlap(spec.regions[i], spec.regions[j]))
        warn("OVERLAPPING_REGIONS", spec.regions[j].loc,
             "regions '" + spec.regions[i].qualified_name() + "' and '" + spec.regions[j].qualified_name() +
                 "' overlap");

  for (const auto& name : spec.objects_of_interest)
    if (!spec.find_object(name))
      error("OBJ_OF_INTEREST_NOT_OBJECT", {}, "'" + name + "' is listed as an object of interest but is not an object");

  auto check_refs = [&](const std::vector<Predicate>& preds) {
    for (const auto& p : preds) {
      if (p.args.size() != arity(p.relation)) {
        error("BAD_ARITY", p.loc, std::string(to_string(p.relation)) + " has the wrong number of arguments");
        continue;
      }
      for (std::size_t i = 0; i < p.args.size(); ++i) {
        if (names.count(p.args[i])) continue;
        if (i == 1 && spec.find_region(p.args[i])) continue;
        if (i == 1 && p.args[i].find("region") != std::string::npos)
          error("UNDECLARED_REGION", p.loc, "region '" + p.args[i] + "' is not defined");
        else
          error("UNDECLARED_OBJECT", p.loc, "'" + p.args[i] + "' is not declared");
      }
      if (p.args.size() == 2 && p.args[0] == p.args[1])
        error("SELF_REFERENCE", p.loc, "'" + p.args[0] + "' cannot be related to itself");
    }
  };
  check_refs(spec.init_conditions);
  check_refs(spec.goal_conditions);

  for (const auto& p : spec.goal_conditions) {
    if (p.args.empty()) continue;
    if (is_placement(p) && spec.find_fixture(p.args[0]) && !spec.find_object(p.args[0]))
      error("GOAL_ON_FIXTURE", p.loc, "goal moves fixture '" + p.args[0] + "', which cannot be manipulated");
    if (!is_placement(p))
      warn("UNEVALUATED_PREDICATE", p.loc,
           std::string(to_string(p.relation)) + " goals are accepted but never evaluated by the simulator");
  }

  auto placements = analyse_placements(spec);
  for (auto& d : placements.diagnostics) out.push_back(std::move(d));
  for (const auto& d : spec.objects)
    if (!placements.placed.count(d.instance_name))
      error("UNPLACED_OBJECT", d.loc, "object '" + d.instance_name + "' has no init placement");
  return out;
}

std::vector<Diagnostic> validate(const TaskSpec& spec) { return validate(spec, ObjectRegistry::active()); }

// ---------------------------------------------------------------------------
// Editing

std::string fresh_instance_name(const TaskSpec& spec, std::string_view class_name) {
  for (unsigned k = 1;; ++k) {
    std::string candidate = std::string(class_name) + "_" + std::to_string(k);
    if (!spec.find_instance(candidate)) return candidate;
  }
}

TaskSpec add_distractor(const TaskSpec& spec, std::string_view class_name, const Region& region,
                        const ObjectRegistry& registry) {
  if (!registry.contains(class_name))
    throw Error("UNKNOWN_CLASS", "class '" + std::string(class_name) + "' is not in the object registry");
  for (const auto& r : spec.regions)
    if (r.qualified_name() == region.qualified_name() || r.name == region.name)
      throw Error("DUPLICATE_REGION", "region '" + region.name + "' is already defined");
  if (region.x_min > region.x_max || region.y_min > region.y_max || region.yaw_min > region.yaw_max)
    throw Error("INVALID_RANGE", "region '" + region.name + "' has min > max");

  TaskSpec out = spec;
  const std::string instance = fresh_instance_name(spec, class_name);
  out.objects.push_back({instance, std::string(class_name), {}});
  Region added = region;
  added.loc = {};
  out.regions.push_back(added);
  out.init_conditions.push_back({Relation::On, {instance, added.qualified_name()}, {}});
  return out;
}

TaskSpec add_distractor(const TaskSpec& spec, std::string_view class_name, const Region& region) {
  return add_distractor(spec, class_name, region, ObjectRegistry::active());
}

TaskSpec remove_instance(const TaskSpec& spec, std::string_view instance_name) {
  TaskSpec out = spec;
  std::erase_if(out.objects, [&](const Declaration& d) { return d.instance_name == instance_name; });
  std::erase_if(out.init_conditions, [&](const Predicate& p) {
    return std::find(p.args.begin(), p.args.end(), instance_name) != p.args.end();
  });
  std::erase_if(out.regions, [&](const Region& r) {
    auto mentions = [&](const std::vector<Predicate>& preds) {
      return std::any_of(preds.begin(), preds.end(), [&](const Predicate& p) {
        return std::any_of(p.args.begin(), p.args.end(),
                           [&](const std::string& a) { return a == r.qualified_name() || a == r.name; });
      });
    };
    return !mentions(out.init_conditions) && !mentions(out.goal_conditions);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Scene sampling

ScenePlacement sample_scene(const TaskSpec& spec, std::uint64_t seed, double clearance,
                            const ObjectRegistry& registry, int max_attempts) {
  auto analysis = analyse_placements(spec);
  if (!analysis.diagnostics.empty()) throw Error("INVALID_SPEC", format_diagnostic(analysis.diagnostics.front()));

  ScenePlacement scene;
  scene.seed = seed;
  Rng rng(seed);
  std::vector<double> radii;

  for (const auto& name : analysis.order) {
    const PlacementInfo& info = analysis.placed.at(name);
    if (!info.region) continue;
    const Region& region = *info.region;
    const double radius = registry.at(spec.find_instance(name)->class_name).footprint_radius;
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      Placement p{name, rng.uniform(region.x_min, region.x_max), rng.uniform(region.y_min, region.y_max),
                  rng.uniform(region.yaw_min, region.yaw_max), region.qualified_name()};
      bool clear = true;
      for (std::size_t i = 0; i < scene.placements.size() && clear; ++i) {
        const double need = std::max(clearance, radius + radii[i]);
        clear = std::hypot(p.x - scene.placements[i].x, p.y - scene.placements[i].y) >= need;
      }
      if (clear) {
        scene.placements.push_back(std::move(p));
        radii.push_back(radius);
        placed = true;
      }
    }
    if (!placed)
      throw Error("PLACEMENT_INFEASIBLE", "could not place '" + name + "' in region '" + region.qualified_name() +
                                              "' after " + std::to_string(max_attempts) + " attempts");
  }

  // Resting instances go after their supports.
  std::set<std::string, std::less<>> done;
  for (const auto& p : scene.placements) done.insert(p.instance_name);
  std::vector<std::string> pending;
  for (const auto& name : analysis.order)
    if (analysis.placed.at(name).support) pending.push_back(name);
  while (!pending.empty()) {
    const auto before = pending.size();
    std::erase_if(pending, [&](const std::string& name) {
      const PlacementInfo& info = analysis.placed.at(name);
      if (!done.count(info.support->instance_name)) return false;
      scene.stacked.push_back({name, info.support->instance_name, info.predicate->relation});
      done.insert(name);
      return true;
    });
    if (pending.size() == before) throw Error("INVALID_SPEC", "unresolvable support chain");
  }
  return scene;
}

ScenePlacement sample_scene(const TaskSpec& spec, std::uint64_t seed, double clearance) {
  return sample_scene(spec, seed, clearance, ObjectRegistry::active());
}

}  // namespace demoforge

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "demoforge/registry.hpp"

namespace demoforge {

/// 1-based line/column of a construct in its source text; (0, 0) for values
/// built programmatically. Locations are provenance only: they compare equal
/// unconditionally so that structural equality ignores them.
struct SourceLoc {
  std::uint32_t line = 0;
  std::uint32_t column = 0;

  friend bool operator==(const SourceLoc&, const SourceLoc&) { return true; }
};

enum class Relation { On, In, Open, Close, TurnedOn };

std::string_view to_string(Relation relation);
std::optional<Relation> relation_from_string(std::string_view name);  // case-insensitive
std::size_t arity(Relation relation);

struct Predicate {
  Relation relation = Relation::On;
  std::vector<std::string> args;
  SourceLoc loc;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct Region {
  std::string name;
  std::string parent;  // fixture instance the region belongs to
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  double yaw_min = 0, yaw_max = 0;
  SourceLoc loc;

  /// Name used when a predicate refers to the region: "<parent>_<name>".
  std::string qualified_name() const { return parent + "_" + name; }
  bool contains(double x, double y, double eps = 1e-9) const {
    return x >= x_min - eps && x <= x_max + eps && y >= y_min - eps && y <= y_max + eps;
  }

  friend bool operator==(const Region&, const Region&) = default;
};

struct Declaration {
  std::string instance_name;
  std::string class_name;
  SourceLoc loc;

  friend bool operator==(const Declaration&, const Declaration&) = default;
};

struct TaskSpec {
  std::string problem_name;
  std::string domain_name;
  std::string language_instruction;
  std::vector<Declaration> objects;
  std::vector<Declaration> fixtures;
  std::vector<Region> regions;
  std::vector<Predicate> init_conditions;
  std::vector<Predicate> goal_conditions;
  std::vector<std::string> objects_of_interest;

  const Declaration* find_object(std::string_view name) const;
  const Declaration* find_fixture(std::string_view name) const;
  const Declaration* find_instance(std::string_view name) const;
  /// Accepts both the qualified "<parent>_<name>" form and the bare region name.
  const Region* find_region(std::string_view name) const;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string code;
  SourceLoc location;
  std::string message;
};

std::string format_diagnostic(const Diagnostic& d, std::string_view file = {});

struct ParseResult {
  std::optional<TaskSpec> spec;       // set iff there are no error diagnostics
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return spec.has_value(); }
};

/// Never throws on malformed input; every failure becomes a Diagnostic.
ParseResult parse_task_spec(std::string_view source);

/// Parses and throws Error("PARSE_ERROR") carrying the first error diagnostic.
TaskSpec parse_task_spec_or_throw(std::string_view source);

/// Canonical text: 2-space indentation, one declaration or predicate per line.
std::string render_task_spec(const TaskSpec& spec);

/// Semantic checks on a parsed spec. Diagnostics are the return value.
std::vector<Diagnostic> validate(const TaskSpec& spec, const ObjectRegistry& registry);
std::vector<Diagnostic> validate(const TaskSpec& spec);  // uses ObjectRegistry::active()
bool has_errors(const std::vector<Diagnostic>& diagnostics);

/// Adds "<class_name>_<k>" (smallest unused k >= 1) plus `region`, and an init
/// predicate placing the new instance in the region. Goals and objects of
/// interest are left untouched.
TaskSpec add_distractor(const TaskSpec& spec, std::string_view class_name, const Region& region,
                        const ObjectRegistry& registry);
TaskSpec add_distractor(const TaskSpec& spec, std::string_view class_name, const Region& region);

/// Name the next add_distractor call would give an instance of `class_name`.
std::string fresh_instance_name(const TaskSpec& spec, std::string_view class_name);

/// Drops an object and every init predicate that mentions it. Regions that are
/// no longer referenced by any predicate are dropped too.
TaskSpec remove_instance(const TaskSpec& spec, std::string_view instance_name);

struct Placement {
  std::string instance_name;
  double x = 0, y = 0, yaw = 0;
  std::string region;  // qualified name of the region it was sampled from

  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Instance resting on (or in) another instance at reset.
struct StackedPlacement {
  std::string instance_name;
  std::string support;
  Relation relation = Relation::On;

  friend bool operator==(const StackedPlacement&, const StackedPlacement&) = default;
};

struct ScenePlacement {
  std::vector<Placement> placements;  // region-sampled, in init order
  std::vector<StackedPlacement> stacked;  // dependency order
  std::uint64_t seed = 0;

  friend bool operator==(const ScenePlacement&, const ScenePlacement&) = default;
};

inline constexpr double kDefaultClearance = 0.03;
inline constexpr int kDefaultPlacementAttempts = 1000;

/// Uniform placement of every region-initialised instance inside its region
/// and yaw interval, with rejection resampling until centres are at least
/// max(clearance, r_a + r_b) apart. Throws Error("PLACEMENT_INFEASIBLE").
ScenePlacement sample_scene(const TaskSpec& spec, std::uint64_t seed, double clearance,
                            const ObjectRegistry& registry,
                            int max_attempts = kDefaultPlacementAttempts);
ScenePlacement sample_scene(const TaskSpec& spec, std::uint64_t seed,
                            double clearance = kDefaultClearance);

}  // namespace demoforge

#include "demoforge/recorder.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>

#include "demoforge/error.hpp"

namespace demoforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json pose_json(const Pose2& p) { return json::array({p.x, p.y, p.yaw}); }

Pose2 pose_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("BAD_ACTION", "pose must be [x, y, yaw]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::set<std::uint32_t> step_ids(const fs::path& dir, std::uint32_t episode_id) {
  std::set<std::uint32_t> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto parsed = parse_step_filename(entry.path().filename().string());
    if (parsed && parsed->first == episode_id) out.insert(parsed->second);
  }
  return out;
}

}  // namespace

const char* to_string(Modality m) {
  switch (m) {
    case Modality::color: return "color";
    case Modality::depth: return "depth";
    case Modality::action: return "action";
    case Modality::reward: return "reward";
    case Modality::info: return "info";
  }
  return "?";
}

const char* to_string(Grip g) {
  switch (g) {
    case Grip::open: return "open";
    case Grip::close: return "close";
    case Grip::hold: return "hold";
  }
  return "?";
}

Grip grip_from_string(std::string_view s) {
  if (s == "open") return Grip::open;
  if (s == "close") return Grip::close;
  if (s == "hold") return Grip::hold;
  throw Error("BAD_ACTION", "unknown grip '" + std::string(s) + "'");
}

json action_to_json(const StepAction& action) {
  if (const auto* p = std::get_if<ActionPrimitive>(&action))
    return {{"type", "primitive"}, {"pick", pose_json(p->pick_pose)}, {"place", pose_json(p->place_pose)}};
  if (const auto* c = std::get_if<GripperCommand>(&action))
    return {{"type", "command"},
            {"delta", json::array({c->dx, c->dy, c->dz, c->droll, c->dpitch, c->dyaw})},
            {"grip", to_string(c->grip)}};
  return nullptr;
}

StepAction action_from_json(const json& j) {
  if (j.is_null()) return std::monostate{};
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "primitive") return ActionPrimitive{pose_from(j.at("pick")), pose_from(j.at("place"))};
    if (type == "command") {
      const json& d = j.at("delta");
      if (!d.is_array() || d.size() != 6) throw Error("BAD_ACTION", "delta must have 6 components");
      GripperCommand c{d[0].get<double>(), d[1].get<double>(), d[2].get<double>(),
                       d[3].get<double>(), d[4].get<double>(), d[5].get<double>(),
                       grip_from_string(j.at("grip").get<std::string>())};
      return c;
    }
    throw Error("BAD_ACTION", "unknown action type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error("BAD_ACTION", e.what());
  }
}

json make_step_info(const WorldState& state, std::uint32_t step_id) {
  json objects = json::array();
  for (const auto& o : state.objects)
    objects.push_back({{"name", o.instance_name}, {"x", o.x}, {"y", o.y}, {"yaw", o.yaw}, {"z", o.base_z}});
  return {{"task", state.spec ? state.spec->problem_name : std::string{}},
          {"seed", state.seed},
          {"step", step_id},
          {"objects", std::move(objects)},
          {"held", state.held ? json(*state.held) : json(nullptr)},
          {"camera",
           {{"width", state.camera.width},
            {"height", state.camera.height},
            {"camera_height", state.camera.camera_height}}}};
}

StepRecord make_step_record(std::uint32_t episode_id, std::uint32_t step_id, const WorldState& state,
                            const Observation& observation, StepAction action, double reward) {
  return StepRecord{episode_id,        step_id,
                    observation.rgb,   observation.depth,
                    std::move(action), static_cast<float>(reward),
                    make_step_info(state, step_id)};
}

std::string step_filename(std::uint32_t episode_id, std::uint32_t step_id) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%06u-%04u.dfs", episode_id, step_id);
  return buf;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> parse_step_filename(std::string_view name) {
  constexpr std::string_view ext = ".dfs";
  if (name.size() <= ext.size() || !name.ends_with(ext)) return std::nullopt;
  name.remove_suffix(ext.size());
  const auto dash = name.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  const auto number = [](std::string_view s, std::size_t min_width) -> std::optional<std::uint32_t> {
    if (s.size() < min_width || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
      return std::nullopt;
    // Wider than the padding only when the value needs it.
    if (s.size() > min_width && s.front() == '0') return std::nullopt;
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  };
  const auto e = number(name.substr(0, dash), 6);
  const auto s = number(name.substr(dash + 1), 4);
  if (!e || !s) return std::nullopt;
  return std::pair{*e, *s};
}

fs::path modality_dir(const fs::path& root, Modality m) { return root / to_string(m); }

void save_step(const fs::path& root, const StepRecord& r) {
  const std::string name = step_filename(r.episode_id, r.step_id);
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error("IO_FAILURE", "recorder root " + root.string() + " does not exist");
  for (Modality m : kAllModalities) {
    const fs::path dir = modality_dir(root, m);
    fs::create_directories(dir, ec);
    if (ec) throw Error("IO_FAILURE", "cannot create " + dir.string() + ": " + ec.message());
    if (fs::exists(dir / name, ec)) throw Error("DUPLICATE_STEP", (dir / name).string() + " exists");
  }
  write_array_file(modality_dir(root, Modality::color) / name, make_array(r.rgb));
  write_array_file(modality_dir(root, Modality::depth) / name, make_array(r.depth));
  write_array_file(modality_dir(root, Modality::action) / name, make_utf8(action_to_json(r.action).dump()));
  write_array_file(modality_dir(root, Modality::reward) / name, make_scalar_f32(r.reward));
  write_array_file(modality_dir(root, Modality::info) / name, make_utf8(r.info.dump()));
}

std::vector<StepRecord> load_episode(const fs::path& root, std::uint32_t episode_id) {
  std::array<std::set<std::uint32_t>, 5> ids;
  std::set<std::uint32_t> all;
  for (Modality m : kAllModalities) {
    ids[static_cast<std::size_t>(m)] = step_ids(modality_dir(root, m), episode_id);
    all.insert(ids[static_cast<std::size_t>(m)].begin(), ids[static_cast<std::size_t>(m)].end());
  }
  std::vector<StepRecord> out;
  for (std::uint32_t step : all) {
    for (Modality m : kAllModalities)
      if (!ids[static_cast<std::size_t>(m)].contains(step))
        throw Error("MISSING_MODALITY", std::string(to_string(m)) + " missing at episode " +
                                            std::to_string(episode_id) + " step " + std::to_string(step));
    const std::string name = step_filename(episode_id, step);
    StepRecord r;
    r.episode_id = episode_id;
    r.step_id = step;
    r.rgb = to_rgb_image(read_array_file(modality_dir(root, Modality::color) / name));
    r.depth = to_depth_image(read_array_file(modality_dir(root, Modality::depth) / name));
    const Array reward = read_array_file(modality_dir(root, Modality::reward) / name);
    if (reward.dtype != DType::f32 || !reward.shape.empty())
      throw Error("CORRUPT_FILE", "reward must be an f32 scalar: " + name);
    r.reward = to_f32(reward)[0];
    try {
      r.action = action_from_json(json::parse(to_text(read_array_file(modality_dir(root, Modality::action) / name))));
      r.info = json::parse(to_text(read_array_file(modality_dir(root, Modality::info) / name)));
    } catch (const json::exception& e) {
      throw Error("CORRUPT_FILE", name + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == "CORRUPT_FILE") throw;
      throw Error("CORRUPT_FILE", name + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

SyncReport verify_sync(const fs::path& root, std::uint32_t episode_id) {
  SyncReport report;
  report.episode_id = episode_id;
  std::optional<std::set<std::uint32_t>> reference;
  report.ok = true;
  for (Modality m : kAllModalities) {
    const auto ids = step_ids(modality_dir(root, m), episode_id);
    report.steps[static_cast<std::size_t>(m)] = ids.size();
    if (!reference) reference = ids;
    else if (ids != *reference) report.ok = false;
  }
  return report;
}

std::vector<std::uint32_t> list_episodes(const fs::path& root) {
  std::set<std::uint32_t> out;
  std::error_code ec;
  for (Modality m : kAllModalities) {
    const fs::path dir = modality_dir(root, m);
    if (!fs::is_directory(dir, ec)) continue;
    for (const auto& entry : fs::directory_iterator(dir))
      if (const auto parsed = parse_step_filename(entry.path().filename().string())) out.insert(parsed->first);
  }
  return {out.begin(), out.end()};
}

bool is_recorder_root(const fs::path& dir) {
  std::error_code ec;
  return std::any_of(kAllModalities.begin(), kAllModalities.end(),
                     [&](Modality m) { return fs::is_directory(modality_dir(dir, m), ec); });
}

}  // namespace demoforge

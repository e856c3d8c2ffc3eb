#include "demoforge/aggregator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <thread>

#include "demoforge/error.hpp"

namespace demoforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Verdict reject(RejectReason r, std::string detail) { return Verdict{r, std::move(detail)}; }

struct Loaded {
  EpisodeVerdict verdict;
  std::vector<StepRecord> steps;
};

Loaded load_and_validate(const fs::path& root, std::uint32_t episode_id) {
  Loaded out;
  out.verdict.root = root;
  out.verdict.episode_id = episode_id;
  const SyncReport sync = verify_sync(root, episode_id);
  out.verdict.steps = *std::max_element(sync.steps.begin(), sync.steps.end());
  if (!sync.ok) {
    std::string detail;
    for (Modality m : kAllModalities) detail += std::string(to_string(m)) + "=" + std::to_string(sync.count(m)) + " ";
    detail.pop_back();
    out.verdict.verdict = reject(RejectReason::modality_mismatch, detail);
    return out;
  }
  try {
    out.steps = load_episode(root, episode_id);
  } catch (const Error& e) {
    out.verdict.verdict = reject(RejectReason::corrupt, e.what());
    return out;
  }
  out.verdict.verdict = validate_episode(out.steps);
  if (!out.verdict.verdict.accepted()) out.steps.clear();
  return out;
}

}  // namespace

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::modality_mismatch: return "MODALITY_MISMATCH";
    case RejectReason::too_short: return "TOO_SHORT";
    case RejectReason::incomplete: return "INCOMPLETE";
    case RejectReason::missing_info: return "MISSING_INFO";
    case RejectReason::corrupt: return "CORRUPT_FILE";
  }
  return "?";
}

Verdict validate_episode(const std::vector<StepRecord>& episode) {
  if (episode.size() < 2) return reject(RejectReason::too_short, std::to_string(episode.size()) + " steps");
  const auto& first = episode.front();
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const auto& s = episode[t];
    if (s.step_id != t) return reject(RejectReason::modality_mismatch, "step ids are not 0..T-1");
    if (s.rgb.height != first.rgb.height || s.rgb.width != first.rgb.width || s.depth.height != s.rgb.height ||
        s.depth.width != s.rgb.width)
      return reject(RejectReason::modality_mismatch, "frame shape changes at step " + std::to_string(t));
    if (!s.info.is_object() || s.info.empty())
      return reject(RejectReason::missing_info, "no info at step " + std::to_string(t));
  }
  double cumulative = 0;
  for (const auto& s : episode) cumulative += s.reward;
  if (std::abs(cumulative - 1.0) > kCompletionTolerance)
    return reject(RejectReason::incomplete, "cumulative reward " + std::to_string(cumulative));
  return {};
}

Verdict validate_episode(const fs::path& root, std::uint32_t episode_id) {
  return load_and_validate(root, episode_id).verdict.verdict;
}

json ValidationReport::to_json() const {
  json eps = json::array();
  for (const auto& e : episodes) {
    json j{{"root", e.root.string()},
           {"episode_id", e.episode_id},
           {"steps", e.steps},
           {"accepted", e.verdict.accepted()}};
    if (!e.verdict.accepted()) {
      j["reason"] = to_string(*e.verdict.reason);
      j["detail"] = e.verdict.detail;
    }
    eps.push_back(std::move(j));
  }
  return {{"scanned", scanned}, {"accepted", accepted}, {"rejected", rejected}, {"reasons", reasons},
          {"episodes", std::move(eps)}};
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> roots;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (!fs::is_directory(in, ec)) throw Error("IO_FAILURE", in.string() + " is not a directory");
    if (is_recorder_root(in)) {
      roots.push_back(in);
      continue;
    }
    std::vector<fs::path> children;
    for (const auto& entry : fs::directory_iterator(in))
      if (entry.is_directory() && is_recorder_root(entry.path())) children.push_back(entry.path());
    std::sort(children.begin(), children.end());
    roots.insert(roots.end(), children.begin(), children.end());
  }
  return roots;
}

namespace {

std::vector<Loaded> scan(const std::vector<fs::path>& inputs, std::size_t workers) {
  std::vector<std::pair<fs::path, std::uint32_t>> jobs;
  for (const auto& root : expand_inputs(inputs))
    for (std::uint32_t ep : list_episodes(root)) jobs.emplace_back(root, ep);
  std::vector<Loaded> results(jobs.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(jobs.size(), 1));
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++)
        results[i] = load_and_validate(jobs[i].first, jobs[i].second);
    }));
  for (auto& f : pool) f.get();
  return results;
}

ValidationReport summarize(const std::vector<Loaded>& loaded) {
  ValidationReport report;
  for (const auto& l : loaded) {
    report.episodes.push_back(l.verdict);
    ++report.scanned;
    if (l.verdict.verdict.accepted()) {
      ++report.accepted;
    } else {
      ++report.rejected;
      ++report.reasons[to_string(*l.verdict.verdict.reason)];
    }
  }
  return report;
}

}  // namespace

ValidationReport validate_inputs(const std::vector<fs::path>& inputs) { return summarize(scan(inputs, 0)); }

ContainerContents build_container(const std::vector<std::vector<StepRecord>>& episodes, const TaskSpec& spec,
                                  const GatherConfig& config) {
  ContainerContents out;
  json env_config = json::object();
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const auto& steps = episodes[k];
    const std::string group = "data/demo_" + std::to_string(k) + "/";
    const auto T = static_cast<std::uint32_t>(steps.size());
    const std::uint32_t H = steps.front().rgb.height, W = steps.front().rgb.width;

    Array rgb{DType::u8, {T, H, W, 3}, {}};
    rgb.data.reserve(std::size_t{T} * H * W * 3);
    for (const auto& s : steps) rgb.data.insert(rgb.data.end(), s.rgb.pixels.begin(), s.rgb.pixels.end());

    std::vector<float> depth;
    depth.reserve(std::size_t{T} * H * W);
    for (const auto& s : steps) depth.insert(depth.end(), s.depth.values.begin(), s.depth.values.end());
    std::vector<float> rewards;
    json actions = json::array(), info = json::array();
    for (const auto& s : steps) {
      rewards.push_back(s.reward);
      actions.push_back(action_to_json(s.action));
      info.push_back(s.info);
    }
    out.emplace_back(group + "rgb", std::move(rgb));
    out.emplace_back(group + "depth", make_f32(depth, {T, H, W}));
    out.emplace_back(group + "actions", make_utf8(actions.dump()));
    out.emplace_back(group + "rewards", make_f32(rewards, {T}));
    out.emplace_back(group + "info", make_utf8(info.dump()));
    if (k == 0 && steps.front().info.contains("camera")) env_config["camera"] = steps.front().info["camera"];
  }
  env_config["simulator"] = "kinematic-2.5d";
  env_config["control_freq"] = config.control_freq;
  out.emplace_back("attrs/created_at", make_utf8(config.created_at));
  out.emplace_back("attrs/control_freq", make_scalar_f64(config.control_freq));
  out.emplace_back("attrs/task_spec_text", make_utf8(render_task_spec(spec)));
  out.emplace_back("attrs/env_config", make_utf8(env_config.dump()));
  out.emplace_back("attrs/tool_version", make_utf8(kToolVersion));
  return out;
}

GatherResult gather(const std::vector<fs::path>& inputs, const TaskSpec& spec, const GatherConfig& config,
                    const fs::path& out) {
  std::vector<Loaded> loaded = scan(inputs, config.workers);
  GatherResult result;
  result.report = summarize(loaded);
  std::vector<std::vector<StepRecord>> accepted;
  for (auto& l : loaded)
    if (l.verdict.verdict.accepted()) {
      result.total_steps += l.steps.size();
      accepted.push_back(std::move(l.steps));
    }
  if (accepted.empty()) throw Error("EMPTY_DATASET", "no episode was accepted");
  result.demos = accepted.size();

  const ContainerContents contents = build_container(accepted, spec, config);
  const std::vector<std::uint8_t> bytes = encode_container(contents);
  // Read-back verification before anything becomes visible.
  const ContainerReader check = ContainerReader::from_bytes(bytes);
  if (check.read_all() != contents) throw Error("IO_FAILURE", "container failed read-back verification");
  if (out.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
  }
  write_file_atomic(out, bytes);
  if (read_file_bytes(out) != bytes) throw Error("IO_FAILURE", "container on disk differs from what was written");
  return result;
}

DemoView read_demo(const ContainerReader& reader, const std::string& group) {
  const std::string base = "data/" + group + "/";
  const Array rgb = reader.read(base + "rgb");
  const Array depth = reader.read(base + "depth");
  const std::vector<float> rewards = to_f32(reader.read(base + "rewards"));
  const json actions = json::parse(to_text(reader.read(base + "actions")));
  const json info = json::parse(to_text(reader.read(base + "info")));
  if (rgb.shape.size() != 4 || depth.shape.size() != 3 || rgb.shape[0] != rewards.size() ||
      depth.shape[0] != rewards.size() || actions.size() != rewards.size() || info.size() != rewards.size())
    throw Error("CORRUPT_INDEX", group + ": modality lengths disagree");
  const std::uint32_t H = rgb.shape[1], W = rgb.shape[2];
  const std::size_t frame = std::size_t{H} * W;
  const std::vector<float> d = to_f32(depth);
  DemoView view{group, {}};
  const std::uint32_t k = static_cast<std::uint32_t>(std::stoul(group.substr(5)));
  for (std::uint32_t t = 0; t < rewards.size(); ++t) {
    StepRecord s;
    s.episode_id = k;
    s.step_id = t;
    s.rgb = RgbImage{H, W, {rgb.data.begin() + static_cast<std::ptrdiff_t>(t * frame * 3),
                            rgb.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * frame * 3)}};
    s.depth = DepthImage{H, W, {d.begin() + static_cast<std::ptrdiff_t>(t * frame),
                                d.begin() + static_cast<std::ptrdiff_t>((t + 1) * frame)}};
    s.action = action_from_json(actions[t]);
    s.reward = rewards[t];
    s.info = info[t];
    view.steps.push_back(std::move(s));
  }
  return view;
}

}  // namespace demoforge

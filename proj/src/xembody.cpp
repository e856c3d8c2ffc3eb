#include "demoforge/xembody.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "demoforge/error.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/simworld.hpp"

namespace demoforge {

using nlohmann::json;

EmbodimentSpec EmbodimentSpec::from_json(const json& j) {
  EmbodimentSpec e;
  try {
    e.name = j.at("name").get<std::string>();
    e.links = j.at("links").get<std::vector<double>>();
    if (j.contains("base")) {
      const json& b = j.at("base");
      e.base = {b.value("x", 0.0), b.value("y", 0.0), b.value("yaw", 0.0)};
    }
  } catch (const json::exception& ex) {
    throw Error("BAD_EMBODIMENT", ex.what());
  }
  e.check();
  return e;
}

EmbodimentSpec EmbodimentSpec::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("IO_FAILURE", "cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    throw Error("BAD_EMBODIMENT", path.string() + ": " + ex.what());
  }
}

json EmbodimentSpec::to_json() const {
  return {{"name", name}, {"links", links}, {"base", {{"x", base.x}, {"y", base.y}, {"yaw", base.yaw}}}};
}

void EmbodimentSpec::check() const {
  if (links.empty()) throw Error("BAD_EMBODIMENT", name + ": chain needs at least one link");
  for (double l : links)
    if (!(l > 0) || !std::isfinite(l)) throw Error("BAD_EMBODIMENT", name + ": link lengths must be positive");
}

Pose6 forward_kinematics(const EmbodimentSpec& emb, const std::vector<double>& joints) {
  if (joints.size() != emb.links.size())
    throw Error("DIMENSION_MISMATCH", std::to_string(joints.size()) + " joint angles for " +
                                          std::to_string(emb.links.size()) + " links");
  double x = 0, y = 0, angle = emb.base.yaw;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    angle += joints[i];
    x += emb.links[i] * std::cos(angle);
    y += emb.links[i] * std::sin(angle);
  }
  return {emb.base.x + x, emb.base.y + y, 0.0, 0.0, 0.0, wrap_angle(angle)};
}

std::vector<UnifiedAction> normalize_trajectory(const EmbodimentSpec& emb,
                                                const std::vector<std::vector<double>>& joint_traj,
                                                const std::vector<double>& gripper_traj) {
  if (joint_traj.size() != gripper_traj.size())
    throw Error("LENGTH_MISMATCH", std::to_string(joint_traj.size()) + " joint steps vs " +
                                       std::to_string(gripper_traj.size()) + " gripper steps");
  if (joint_traj.size() < 2) throw Error("LENGTH_MISMATCH", "trajectory needs at least two steps");
  std::vector<Pose6> poses;
  poses.reserve(joint_traj.size());
  for (const auto& q : joint_traj) poses.push_back(forward_kinematics(emb, q));
  std::vector<UnifiedAction> out;
  out.reserve(poses.size() - 1);
  for (std::size_t t = 0; t + 1 < poses.size(); ++t) {
    UnifiedAction a{};
    for (std::size_t k = 0; k < 5; ++k) a[k] = poses[t + 1][k] - poses[t][k];
    a[5] = wrap_angle(poses[t + 1][5] - poses[t][5]);
    a[6] = gripper_traj[t + 1] >= 0.5 ? 1.0 : 0.0;
    out.push_back(a);
  }
  return out;
}

Pose6 integrate_actions(const Pose6& start, const std::vector<UnifiedAction>& actions) {
  Pose6 p = start;
  for (const auto& a : actions)
    for (std::size_t k = 0; k < 6; ++k) p[k] += a[k];
  p[5] = wrap_angle(p[5]);
  return p;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_mixture(const std::vector<MixtureSource>& sources,
                                                                 const std::vector<double>& weights, std::size_t n,
                                                                 std::uint64_t seed) {
  if (weights.size() != sources.size() || sources.empty())
    throw Error("INVALID_WEIGHTS", "need exactly one weight per source");
  double total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0) || !std::isfinite(weights[i])) throw Error("INVALID_WEIGHTS", "weights must be >= 0");
    if (weights[i] > 0 && sources[i].episodes == 0) throw Error("EMPTY_SOURCE", sources[i].name + " has no episodes");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("INVALID_WEIGHTS", "weights sum to " + std::to_string(total));

  std::vector<double> cumulative;
  double acc = 0;
  for (double w : weights) cumulative.push_back(acc += w);
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01() * acc;
    std::size_t s = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                             cumulative.begin());
    // Rounding can push u onto the upper edge; use the last weighted source then.
    if (s == sources.size())
      while (weights[--s] == 0) {
      }
    draws.emplace_back(s, static_cast<std::size_t>(rng.below(sources[s].episodes)));
  }
  return draws;
}

json DatasetStats::to_json() const {
  return {{"episodes", episodes}, {"total_steps", total_steps}, {"lengths", lengths},
          {"completion_rate", completion_rate}};
}

DatasetStats dataset_stats(const ContainerReader& container) {
  DatasetStats s;
  std::size_t complete = 0;
  for (const auto& group : container.demo_groups()) {
    const std::vector<float> rewards = to_f32(container.read("data/" + group + "/rewards"));
    double sum = 0;
    for (float r : rewards) sum += r;
    complete += sum >= 1.0 - 1e-6;
    s.lengths.push_back(rewards.size());
    s.total_steps += rewards.size();
    ++s.episodes;
  }
  s.completion_rate = s.episodes ? static_cast<double>(complete) / static_cast<double>(s.episodes) : 0.0;
  return s;
}

}  // namespace demoforge

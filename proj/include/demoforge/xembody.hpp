#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "demoforge/container.hpp"

namespace demoforge {

/// End-effector pose (x, y, z, roll, pitch, yaw).
using Pose6 = std::array<double, 6>;
/// (dx, dy, dz, droll, dpitch, dyaw, gripper), gripper in {0, 1}.
using UnifiedAction = std::array<double, 7>;

struct BasePose {
  double x = 0, y = 0, yaw = 0;

  friend bool operator==(const BasePose&, const BasePose&) = default;
};

/// Planar serial chain of revolute joints.
struct EmbodimentSpec {
  std::string name;
  std::vector<double> links;  // m, each > 0
  BasePose base;

  /// {"name": ..., "links": [...], "base": {"x", "y", "yaw"}}. BAD_EMBODIMENT.
  static EmbodimentSpec from_json(const nlohmann::json& j);
  static EmbodimentSpec from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void check() const;  // BAD_EMBODIMENT

  friend bool operator==(const EmbodimentSpec&, const EmbodimentSpec&) = default;
};

/// DIMENSION_MISMATCH unless joints.size() == links.size().
Pose6 forward_kinematics(const EmbodimentSpec& emb, const std::vector<double>& joints);

/// Per-step deltas of the end-effector pose, yaw wrapped to (-pi, pi];
/// gripper copied from step t+1. LENGTH_MISMATCH when the trajectories
/// disagree in length or hold fewer than two steps.
std::vector<UnifiedAction> normalize_trajectory(const EmbodimentSpec& emb,
                                                const std::vector<std::vector<double>>& joint_traj,
                                                const std::vector<double>& gripper_traj);

/// pose_0 plus the summed deltas; the yaw is wrapped.
Pose6 integrate_actions(const Pose6& start, const std::vector<UnifiedAction>& actions);

struct MixtureSource {
  std::string name;
  std::size_t episodes = 0;
};

/// Draws n (source index, episode index) pairs: sources i.i.d. by weight,
/// episodes uniform within the source. EMPTY_SOURCE if a positively
/// weighted source has no episodes; INVALID_WEIGHTS unless the weights are
/// non-negative, one per source and sum to 1 within 1e-9.
std::vector<std::pair<std::size_t, std::size_t>> sample_mixture(const std::vector<MixtureSource>& sources,
                                                                 const std::vector<double>& weights, std::size_t n,
                                                                 std::uint64_t seed);

struct DatasetStats {
  std::size_t episodes = 0;
  std::size_t total_steps = 0;
  std::vector<std::size_t> lengths;
  double completion_rate = 0;

  nlohmann::json to_json() const;
};

DatasetStats dataset_stats(const ContainerReader& container);

}  // namespace demoforge

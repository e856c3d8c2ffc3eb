#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "demoforge/simworld.hpp"
#include "demoforge/tasks.hpp"

namespace demoforge {

struct OracleState {
  TaskKind task_kind = TaskKind::block_insertion;
  std::vector<ActionPrimitive> plan;
  std::size_t plan_cursor = 0;
};

/// Scripted expert with privileged access to the reset state. Plans once,
/// re-planning only when the previous primitive left the scene unchanged or
/// the plan ran out.
class Oracle {
 public:
  Oracle(TaskKind task_kind, const WorldState& reset_state);

  /// Next expert primitive. Throws Error("NO_ACTION") once the goal holds.
  ActionPrimitive act(const Observation& observation);

  const OracleState& state() const { return state_; }

 private:
  void replan();

  OracleState state_;
  WorldState world_;
  std::optional<std::vector<ObjectPose>> poses_at_last_action_;
};

/// Full primitive sequence that solves `kind` from `state`.
std::vector<ActionPrimitive> plan_task(TaskKind kind, const WorldState& state);

/// Moves that transfer n disks between pegs, as (from, to) peg indices. Solves
/// from any legal configuration; `positions[k]` is the peg of disk k, with
/// disk 0 the smallest.
std::vector<std::pair<int, int>> hanoi_moves(std::vector<int> positions, int target_peg);

struct HarnessReport {
  TaskKind task_kind = TaskKind::block_insertion;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0;
  double mean_steps = 0;

  friend bool operator==(const HarnessReport&, const HarnessReport&) = default;
};

struct HarnessOptions {
  CameraConfig camera;
  std::size_t max_steps = 64;
  std::size_t workers = 1;
  std::optional<TaskSpec> spec;  // overrides the built-in task specification
};

/// reset -> act -> step until done for `episodes` seeded episodes. Episode i
/// uses derive_episode_seed(seed, task_index(kind), i).
HarnessReport run_harness(TaskKind kind, std::size_t episodes, std::uint64_t seed,
                          const HarnessOptions& options = {});

}  // namespace demoforge

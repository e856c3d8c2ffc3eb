#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "demoforge/aggregator.hpp"
#include "demoforge/oracles.hpp"
#include "demoforge/recorder.hpp"

namespace demoforge {

struct EpisodeSummary {
  std::uint32_t episode_id = 0;
  std::uint64_t seed = 0;
  std::size_t primitives = 0;
  std::size_t records = 0;  // primitives + the terminal observation
  bool success = false;
};

/// One oracle episode: reset, then act -> step -> save_step until done.
/// Record t holds (observation t, action t, reward received on arriving at
/// observation t); the final record has no action.
EpisodeSummary record_oracle_episode(const std::filesystem::path& root, TaskKind kind, const TaskSpec& spec,
                                     std::uint32_t episode_id, std::uint64_t seed, const CameraConfig& camera = {},
                                     std::size_t max_steps = 64);

struct GenConfig {
  std::vector<TaskKind> tasks;
  std::size_t episodes = 1;
  std::uint64_t seed = 0;
  CameraConfig camera;
  std::filesystem::path out;
  std::optional<TaskSpec> spec;  // replaces the built-in spec; single task only
  std::size_t workers = 1;
  std::size_t max_steps = 64;
};

struct TaskGenReport {
  std::filesystem::path root;
  HarnessReport report;
  std::vector<EpisodeSummary> episodes;
};

/// Writes each task's episodes to <out>/<task-name>/, numbered from 0.
/// Errors name the failing task and episode.
std::vector<TaskGenReport> generate(const GenConfig& config);

struct PipelineResult {
  TaskGenReport generated;
  GatherResult gathered;
};

/// gen into a scratch directory next to `out`, then gather into `out`. The
/// scratch directory is removed whatever happens.
PipelineResult run_pipeline(TaskKind kind, const std::optional<TaskSpec>& spec, std::size_t episodes,
                            std::uint64_t seed, const CameraConfig& camera, const GatherConfig& gather_config,
                            const std::filesystem::path& out, std::size_t workers = 1);

}  // namespace demoforge

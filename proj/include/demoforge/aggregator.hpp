#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoforge/container.hpp"
#include "demoforge/recorder.hpp"
#include "demoforge/taskspec.hpp"

namespace demoforge {

inline constexpr double kCompletionTolerance = 1e-6;

enum class RejectReason { modality_mismatch, too_short, incomplete, missing_info, corrupt };
const char* to_string(RejectReason r);  // e.g. "MODALITY_MISMATCH"

struct Verdict {
  std::optional<RejectReason> reason;  // empty: accepted
  std::string detail;

  bool accepted() const { return !reason.has_value(); }
};

/// Accepts an episode iff its modalities agree, it has at least two steps,
/// every step carries info and the rewards sum to 1.
Verdict validate_episode(const std::vector<StepRecord>& episode);

/// Same rules against an on-disk episode, including the per-modality step
/// sets (verify_sync) and decodability.
Verdict validate_episode(const std::filesystem::path& root, std::uint32_t episode_id);

struct EpisodeVerdict {
  std::filesystem::path root;
  std::uint32_t episode_id = 0;
  std::size_t steps = 0;
  Verdict verdict;
};

struct ValidationReport {
  std::vector<EpisodeVerdict> episodes;
  std::size_t scanned = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> reasons;

  nlohmann::json to_json() const;
};

/// Expands inputs into recorder roots: a recorder root stands for itself, any
/// other directory for its recorder-root subdirectories in name order.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

ValidationReport validate_inputs(const std::vector<std::filesystem::path>& inputs);

struct GatherConfig {
  std::string created_at;  // stored verbatim; callers inject it for reproducibility
  double control_freq = 20.0;
  std::size_t workers = 0;  // episode readers; 0 = hardware concurrency
};

struct GatherResult {
  ValidationReport report;
  std::size_t demos = 0;
  std::size_t total_steps = 0;
};

inline constexpr const char* kToolVersion = "demoforge 0.1.0";

/// Validates every episode under `inputs` and packs the accepted ones, in
/// input order, as data/demo_K groups plus attrs/. The container is verified
/// by reading it back before it is renamed into place. EMPTY_DATASET when
/// nothing was accepted; IO_FAILURE on write errors.
GatherResult gather(const std::vector<std::filesystem::path>& inputs, const TaskSpec& spec,
                    const GatherConfig& config, const std::filesystem::path& out);

/// Container contents for the given episodes (already validated).
ContainerContents build_container(const std::vector<std::vector<StepRecord>>& episodes, const TaskSpec& spec,
                                  const GatherConfig& config);

struct DemoView {
  std::string group;
  std::vector<StepRecord> steps;
};

/// Reassembles one demo group into step records (episode id = K).
DemoView read_demo(const ContainerReader& reader, const std::string& group);

}  // namespace demoforge

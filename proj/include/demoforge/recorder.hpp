#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "demoforge/array_file.hpp"
#include "demoforge/simworld.hpp"

namespace demoforge {

enum class Modality { color, depth, action, reward, info };
inline constexpr std::array<Modality, 5> kAllModalities{Modality::color, Modality::depth, Modality::action,
                                                        Modality::reward, Modality::info};
const char* to_string(Modality m);

/// Oracle episodes record primitives, teleoperated ones record gripper
/// commands; the terminal record carries no action.
using StepAction = std::variant<std::monostate, ActionPrimitive, GripperCommand>;

nlohmann::json action_to_json(const StepAction& action);
StepAction action_from_json(const nlohmann::json& j);  // BAD_ACTION
const char* to_string(Grip g);
Grip grip_from_string(std::string_view s);  // BAD_ACTION

struct StepRecord {
  std::uint32_t episode_id = 0;
  std::uint32_t step_id = 0;
  RgbImage rgb;
  DepthImage depth;
  StepAction action;
  float reward = 0;  // received on arriving at this observation
  nlohmann::json info = nlohmann::json::object();

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Metadata stored with every step: object poses, task name, seed, camera.
nlohmann::json make_step_info(const WorldState& state, std::uint32_t step_id);

StepRecord make_step_record(std::uint32_t episode_id, std::uint32_t step_id, const WorldState& state,
                            const Observation& observation, StepAction action, double reward);

/// "EEEEEE-SSSS.dfs", zero-padded to at least 6 and 4 digits.
std::string step_filename(std::uint32_t episode_id, std::uint32_t step_id);
std::optional<std::pair<std::uint32_t, std::uint32_t>> parse_step_filename(std::string_view name);

std::filesystem::path modality_dir(const std::filesystem::path& root, Modality m);

/// Writes the five modality files for one step, creating the modality
/// directories on first use. DUPLICATE_STEP if any of them already exists
/// (nothing is written then); IO_FAILURE otherwise.
void save_step(const std::filesystem::path& root, const StepRecord& record);

/// Records sorted by step id. MISSING_MODALITY when a step lacks one of the
/// five files, CORRUPT_FILE on undecodable content.
std::vector<StepRecord> load_episode(const std::filesystem::path& root, std::uint32_t episode_id);

struct SyncReport {
  std::uint32_t episode_id = 0;
  std::array<std::size_t, 5> steps{};  // indexed by Modality
  bool ok = false;

  std::size_t count(Modality m) const { return steps[static_cast<std::size_t>(m)]; }
};

/// ok iff all five modalities hold the same set of step ids.
SyncReport verify_sync(const std::filesystem::path& root, std::uint32_t episode_id);

/// Episode ids present under any modality, ascending.
std::vector<std::uint32_t> list_episodes(const std::filesystem::path& root);

/// True if `dir` looks like a recorder root (has any modality directory).
bool is_recorder_root(const std::filesystem::path& dir);

}  // namespace demoforge

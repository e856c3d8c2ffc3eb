#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "demoforge/recorder.hpp"
#include "demoforge/simworld.hpp"

namespace demoforge {

struct TeleopConfig {
  double control_freq = 20.0;      // Hz
  double pos_sensitivity = 0.01;   // m per unit input
  double rot_sensitivity = 0.05;   // rad per unit input
  std::uint32_t debounce_steps = 10;
  double max_step = 0.01;          // m per tick, per axis
  CameraConfig camera;

  void check() const;  // BAD_CONFIG

  double tick_seconds() const { return 1.0 / control_freq; }
};

struct DeviceInput {
  std::array<double, 3> dpos{};  // unit axes in [-1, 1]
  std::array<double, 3> drot{};
  Grip grip = Grip::hold;

  bool in_bounds() const;

  friend bool operator==(const DeviceInput&, const DeviceInput&) = default;
};

enum class Phase { idle, running, debouncing, saved, discarded };
const char* to_string(Phase p);

enum class ControlCommand { reset, discard, save_request };
const char* to_string(ControlCommand c);
std::optional<ControlCommand> control_from_string(std::string_view s);

struct SessionState {
  Phase phase = Phase::idle;
  std::uint32_t success_streak = 0;
  std::uint64_t tick = 0;
  std::vector<StepRecord> episode_buffer;
  std::uint32_t episode_id = 0;  // id of the current (or last) episode
  std::uint32_t resets = 0;
  double last_reward = 0;        // reward received on arriving at the current frame
  std::optional<std::filesystem::path> saved_path;
};

/// Translation is scaled and clamped per axis to max_step, then shortened so
/// the gripper stays inside the workspace; rotation is scaled only.
GripperCommand input_to_action(const DeviceInput& input, const TeleopConfig& config, const Gripper& gripper,
                               const Workspace& workspace);

struct DebounceState {
  Phase phase = Phase::running;
  std::uint32_t success_streak = 0;

  friend bool operator==(const DebounceState&, const DebounceState&) = default;
};

/// One success flag through the debounce: the streak grows while the goal
/// holds and the phase becomes saved once it reaches debounce_steps.
DebounceState advance_debounce(DebounceState state, bool success, std::uint32_t debounce_steps);

/// Phase transition table for operator commands; INVALID_TRANSITION for
/// undefined (phase, command) pairs.
Phase next_phase(Phase phase, ControlCommand cmd);

struct TickOutput {
  SessionState session;
  WorldState world;
  Observation frame;
};

/// Advances one control period: maps the input, steps the world, appends the
/// step record and updates the debounce. On reaching saved the episode (plus
/// its terminal record) is written to <session_dir>/tmp/ep_EEEEEE through a
/// .partial directory and a rename. Outside running/debouncing nothing moves.
TickOutput tick(const TeleopConfig& config, const std::filesystem::path& session_dir, SessionState session,
                WorldState world, const DeviceInput& input);

std::filesystem::path temp_episode_dir(const std::filesystem::path& session_dir, std::uint32_t episode_id);

/// Owns one operator session: the world, the session state and the latest
/// frame.
class TeleopSession {
 public:
  TeleopSession(TaskSpec spec, TeleopConfig config, std::filesystem::path session_dir, std::uint64_t seed);

  /// reset re-randomizes the scene with a fresh seed and clears the buffer;
  /// discard drops the buffer; save_request only acknowledges a saved
  /// episode.
  void control(ControlCommand cmd);
  void tick(const DeviceInput& input);

  const SessionState& session() const { return session_; }
  const WorldState& world() const { return world_; }
  const Observation& frame() const { return frame_; }
  const TeleopConfig& config() const { return config_; }
  const TaskSpec& spec() const { return *spec_; }
  double simulated_time() const { return static_cast<double>(session_.tick) / config_.control_freq; }

 private:
  void reset_world();

  std::shared_ptr<const TaskSpec> spec_;
  TeleopConfig config_;
  std::filesystem::path session_dir_;
  std::uint64_t seed_;
  SessionState session_;
  WorldState world_;
  Observation frame_;
};

}  // namespace demoforge

#include "demoforge/teleop.hpp"

#include <algorithm>
#include <cmath>

#include "demoforge/error.hpp"

namespace demoforge {

namespace fs = std::filesystem;

void TeleopConfig::check() const {
  if (!(control_freq > 0) || !std::isfinite(control_freq)) throw Error("BAD_CONFIG", "control_freq must be > 0");
  if (debounce_steps < 1) throw Error("BAD_CONFIG", "debounce_steps must be >= 1");
  if (!(max_step > 0)) throw Error("BAD_CONFIG", "max_step must be > 0");
  if (!(pos_sensitivity >= 0) || !(rot_sensitivity >= 0)) throw Error("BAD_CONFIG", "sensitivities must be >= 0");
  camera.check();
}

bool DeviceInput::in_bounds() const {
  const auto ok = [](double v) { return std::isfinite(v) && v >= -1.0 && v <= 1.0; };
  return std::all_of(dpos.begin(), dpos.end(), ok) && std::all_of(drot.begin(), drot.end(), ok);
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::idle: return "idle";
    case Phase::running: return "running";
    case Phase::debouncing: return "debouncing";
    case Phase::saved: return "saved";
    case Phase::discarded: return "discarded";
  }
  return "?";
}

const char* to_string(ControlCommand c) {
  switch (c) {
    case ControlCommand::reset: return "reset";
    case ControlCommand::discard: return "discard";
    case ControlCommand::save_request: return "save_request";
  }
  return "?";
}

std::optional<ControlCommand> control_from_string(std::string_view s) {
  if (s == "reset") return ControlCommand::reset;
  if (s == "discard") return ControlCommand::discard;
  if (s == "save_request") return ControlCommand::save_request;
  return std::nullopt;
}

GripperCommand input_to_action(const DeviceInput& input, const TeleopConfig& config, const Gripper& gripper,
                               const Workspace& ws) {
  const auto axis = [&](double u) { return std::clamp(u * config.pos_sensitivity, -config.max_step, config.max_step); };
  GripperCommand c;
  c.dx = std::clamp(gripper.x + axis(input.dpos[0]), ws.x_min, ws.x_max) - gripper.x;
  c.dy = std::clamp(gripper.y + axis(input.dpos[1]), ws.y_min, ws.y_max) - gripper.y;
  c.dz = std::clamp(gripper.z + axis(input.dpos[2]), ws.z_min, ws.z_max) - gripper.z;
  c.droll = input.drot[0] * config.rot_sensitivity;
  c.dpitch = input.drot[1] * config.rot_sensitivity;
  c.dyaw = input.drot[2] * config.rot_sensitivity;
  c.grip = input.grip;
  return c;
}

DebounceState advance_debounce(DebounceState s, bool success, std::uint32_t debounce_steps) {
  if (s.phase != Phase::running && s.phase != Phase::debouncing) return s;
  if (!success) return {Phase::running, 0};
  ++s.success_streak;
  s.phase = s.success_streak >= debounce_steps ? Phase::saved : Phase::debouncing;
  return s;
}

Phase next_phase(Phase phase, ControlCommand cmd) {
  switch (cmd) {
    case ControlCommand::reset: return Phase::running;
    case ControlCommand::discard:
      if (phase == Phase::running || phase == Phase::debouncing) return Phase::discarded;
      break;
    case ControlCommand::save_request:
      if (phase == Phase::saved) return Phase::saved;
      break;
  }
  throw Error("INVALID_TRANSITION", std::string(to_string(cmd)) + " in phase " + to_string(phase));
}

fs::path temp_episode_dir(const fs::path& session_dir, std::uint32_t episode_id) {
  char name[32];
  std::snprintf(name, sizeof name, "ep_%06u", episode_id);
  return session_dir / "tmp" / name;
}

namespace {

fs::path flush_episode(const fs::path& session_dir, const SessionState& s) {
  const fs::path final_dir = temp_episode_dir(session_dir, s.episode_id);
  fs::path partial = final_dir;
  partial += ".partial";
  std::error_code ec;
  if (fs::exists(final_dir, ec)) throw Error("IO_FAILURE", final_dir.string() + " already exists");
  fs::remove_all(partial, ec);
  fs::create_directories(partial, ec);
  if (ec) throw Error("IO_FAILURE", "cannot create " + partial.string() + ": " + ec.message());
  try {
    for (const auto& r : s.episode_buffer) save_step(partial, r);
  } catch (...) {
    fs::remove_all(partial, ec);
    throw;
  }
  fs::rename(partial, final_dir, ec);
  if (ec) throw Error("IO_FAILURE", "rename to " + final_dir.string() + ": " + ec.message());
  return final_dir;
}

}  // namespace

TickOutput tick(const TeleopConfig& config, const fs::path& session_dir, SessionState session, WorldState world,
                const DeviceInput& input) {
  if (session.phase != Phase::running && session.phase != Phase::debouncing) {
    Observation frame = observe(world);
    return {std::move(session), std::move(world), std::move(frame)};
  }
  const Observation before = observe(world);
  const GripperCommand command = input_to_action(input, config, world.gripper, world.camera.workspace);
  session.episode_buffer.push_back(make_step_record(session.episode_id, static_cast<std::uint32_t>(session.tick),
                                                    world, before, command, session.last_reward));
  StepResult r = step(world, command);
  ++session.tick;
  session.last_reward = r.reward;
  const DebounceState d =
      advance_debounce({session.phase, session.success_streak}, check_success(r.state), config.debounce_steps);
  session.phase = d.phase;
  session.success_streak = d.success_streak;
  if (session.phase == Phase::saved) {
    session.episode_buffer.push_back(make_step_record(session.episode_id, static_cast<std::uint32_t>(session.tick),
                                                      r.state, r.observation, std::monostate{}, r.reward));
    session.saved_path = flush_episode(session_dir, session);
  }
  return {std::move(session), std::move(r.state), std::move(r.observation)};
}

TeleopSession::TeleopSession(TaskSpec spec, TeleopConfig config, fs::path session_dir, std::uint64_t seed)
    : spec_(std::make_shared<const TaskSpec>(std::move(spec))),
      config_(std::move(config)),
      session_dir_(std::move(session_dir)),
      seed_(seed) {
  config_.check();
  reset_world();
}

void TeleopSession::reset_world() {
  auto r = reset(*spec_, derive_episode_seed(seed_, 0, session_.resets), config_.camera);
  world_ = std::move(r.state);
  frame_ = std::move(r.observation);
}

void TeleopSession::control(ControlCommand cmd) {
  const Phase next = next_phase(session_.phase, cmd);
  switch (cmd) {
    case ControlCommand::reset: {
      const std::uint32_t resets = session_.resets + 1;
      session_ = SessionState{};
      session_.resets = resets;
      session_.episode_id = resets - 1;
      reset_world();
      break;
    }
    case ControlCommand::discard:
      session_.episode_buffer.clear();
      session_.success_streak = 0;
      break;
    case ControlCommand::save_request: break;
  }
  session_.phase = next;
}

void TeleopSession::tick(const DeviceInput& input) {
  TickOutput out = demoforge::tick(config_, session_dir_, std::move(session_), std::move(world_), input);
  session_ = std::move(out.session);
  world_ = std::move(out.world);
  frame_ = std::move(out.frame);
}

}  // namespace demoforge

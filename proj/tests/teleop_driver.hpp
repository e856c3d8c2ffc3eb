#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include <json.hpp>

#include "demoforge/teleop.hpp"

namespace dftest {

// Closed-loop operator for place-red-in-green that only looks at frame
// messages: carry each red block to the green bowl, then idle.
inline demoforge::DeviceInput scripted_input(const nlohmann::json& frame, const demoforge::TeleopConfig& config) {
  using demoforge::DeviceInput;
  using demoforge::Grip;
  const auto is_red = [](const nlohmann::json& c) { return c[0] >= 150 && c[1] < 100 && c[2] < 100; };
  const auto is_green = [](const nlohmann::json& c) { return c[1] >= 150 && c[0] < 100 && c[2] < 120; };
  const double gx = frame["gripper"]["x"], gy = frame["gripper"]["y"];
  const bool closed = frame["gripper"]["closed"];

  std::optional<nlohmann::json> bowl;
  for (const auto& o : frame["objects"])
    if (is_green(o["color"])) bowl = o;
  DeviceInput in;
  if (!bowl) return in;
  const double bx = (*bowl)["x"], by = (*bowl)["y"];

  const auto toward = [&](double tx, double ty) {
    DeviceInput d;
    d.dpos[0] = std::clamp(0.5 * (tx - gx) / config.pos_sensitivity, -1.0, 1.0);
    d.dpos[1] = std::clamp(0.5 * (ty - gy) / config.pos_sensitivity, -1.0, 1.0);
    return d;
  };
  constexpr double kArrive = 0.002;

  std::optional<nlohmann::json> carried, next;
  for (const auto& o : frame["objects"]) {
    if (!is_red(o["color"])) continue;
    const double ox = o["x"], oy = o["y"];
    if (closed && std::hypot(ox - gx, oy - gy) < 1e-9) carried = o;
    else if (std::hypot(ox - bx, oy - by) > 0.03 && !next) next = o;
  }
  if (carried) {
    if (std::hypot(bx - gx, by - gy) < kArrive) {
      in.grip = Grip::open;
      return in;
    }
    return toward(bx, by);
  }
  if (closed) {
    in.grip = Grip::open;
    return in;
  }
  if (!next) return in;
  const double tx = (*next)["x"], ty = (*next)["y"];
  if (std::hypot(tx - gx, ty - gy) < kArrive) {
    in.grip = Grip::close;
    return in;
  }
  return toward(tx, ty);
}

}  // namespace dftest

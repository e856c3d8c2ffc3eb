#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "demoforge/image.hpp"
#include "demoforge/registry.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/taskspec.hpp"

namespace demoforge {

inline constexpr double kGraspTolerance = 0.02;   // m
inline constexpr double kSlotYawTolerance = 0.05; // rad
inline constexpr double kRestTolerance = 1e-6;    // m

struct Workspace {
  double x_min = -0.25, y_min = -0.25, x_max = 0.25, y_max = 0.25;
  double z_min = 0.0, z_max = 0.3;

  bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }

  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct CameraConfig {
  std::uint32_t width = 160;
  std::uint32_t height = 120;
  double camera_height = 1.0;  // m above the table; orthographic, looking down
  Workspace workspace;
  Rgb background{40, 40, 46};

  /// Throws Error("BAD_CAMERA") unless width, height >= 16 and the height
  /// clears the workspace.
  void check() const;

  friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

struct ObjectInstance {
  std::string instance_name;
  std::string class_name;
  double x = 0, y = 0, yaw = 0;
  double base_z = 0;  // elevation of the object's underside
  double footprint_radius = 0;
  double height = 0;
  double rest_height = 0;
  Rgb color{};
  Shape shape = Shape::square;
  bool graspable = false;  // declared under :objects rather than :fixtures

  double top() const { return base_z + height; }
  double rest_top() const { return base_z + rest_height; }

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Gripper {
  double x = 0, y = -0.2, z = 0.25, yaw = 0;
  bool closed = false;

  friend bool operator==(const Gripper&, const Gripper&) = default;
};

struct Pose2 {
  double x = 0, y = 0, yaw = 0;

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// Pick-and-place primitive, the unit of oracle control.
struct ActionPrimitive {
  Pose2 pick_pose;
  Pose2 place_pose;

  friend bool operator==(const ActionPrimitive&, const ActionPrimitive&) = default;
};

enum class Grip { open, close, hold };

/// Continuous end-effector command, the unit of teleoperation control.
struct GripperCommand {
  double dx = 0, dy = 0, dz = 0;        // m
  double droll = 0, dpitch = 0, dyaw = 0;  // rad
  Grip grip = Grip::hold;

  friend bool operator==(const GripperCommand&, const GripperCommand&) = default;
};

struct WorldState {
  std::vector<ObjectInstance> objects;
  Gripper gripper;
  std::optional<std::string> held;
  std::uint64_t step_index = 0;
  std::uint64_t seed = 0;
  Rng rng;
  std::shared_ptr<const TaskSpec> spec;
  CameraConfig camera;
  std::size_t best_progress = 0;  // most goal predicates ever satisfied at once

  const ObjectInstance* find(std::string_view name) const;
  ObjectInstance* find(std::string_view name);

  friend bool operator==(const WorldState& a, const WorldState& b);
};

struct ObjectPose {
  std::string name;
  double x = 0, y = 0, yaw = 0, z = 0;

  friend bool operator==(const ObjectPose&, const ObjectPose&) = default;
};

struct Observation {
  RgbImage rgb;
  DepthImage depth;
  std::vector<ObjectPose> object_poses;
  std::string instruction;
};

struct ResetResult {
  WorldState state;
  Observation observation;
};

struct StepResult {
  WorldState state;
  Observation observation;
  double reward = 0;
  bool done = false;
  bool effective = false;  // whether the world changed beyond the step counter
};

struct SimOptions {
  double clearance = kDefaultClearance;
  const ObjectRegistry* registry = nullptr;  // nullptr: ObjectRegistry::active()
};

/// Samples the scene, places the gripper at home and renders the first frame.
/// Throws Error("INVALID_SPEC") when validate() reports errors and propagates
/// PLACEMENT_INFEASIBLE from the sampler.
ResetResult reset(const TaskSpec& spec, std::uint64_t seed, const CameraConfig& camera = {},
                  const SimOptions& options = {});

/// Kinematic pick-and-place. A pick that misses every graspable object, or a
/// place the world refuses, is a legal no-effect step with reward 0.
/// Throws Error("OUT_OF_WORKSPACE") if a pose lies outside the workspace.
StepResult step(const WorldState& state, const ActionPrimitive& action);

/// Continuous gripper motion for teleoperation. Closing the gripper within
/// grasp tolerance of an object attaches it; opening releases it where it is.
StepResult step(const WorldState& state, const GripperCommand& command);

std::pair<RgbImage, DepthImage> render(const WorldState& state, const CameraConfig& camera);
Observation observe(const WorldState& state);

bool evaluate(const WorldState& state, const Predicate& predicate);
std::size_t goal_progress(const WorldState& state);
bool check_success(const WorldState& state);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

}  // namespace demoforge

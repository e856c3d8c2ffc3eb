#include "demoforge/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "demoforge/error.hpp"

namespace demoforge {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

void CameraConfig::check() const {
  if (width < 16 || height < 16) throw Error("BAD_CAMERA", "camera images must be at least 16x16");
  if (!(camera_height > workspace.z_max)) throw Error("BAD_CAMERA", "camera must sit above the workspace");
  if (!(workspace.x_min < workspace.x_max) || !(workspace.y_min < workspace.y_max))
    throw Error("BAD_CAMERA", "empty workspace rectangle");
}

const ObjectInstance* WorldState::find(std::string_view name) const {
  for (const auto& o : objects)
    if (o.instance_name == name) return &o;
  return nullptr;
}

ObjectInstance* WorldState::find(std::string_view name) {
  for (auto& o : objects)
    if (o.instance_name == name) return &o;
  return nullptr;
}

bool operator==(const WorldState& a, const WorldState& b) {
  const bool specs_equal = (a.spec == b.spec) || (a.spec && b.spec && *a.spec == *b.spec);
  return specs_equal && a.objects == b.objects && a.gripper == b.gripper && a.held == b.held &&
         a.step_index == b.step_index && a.seed == b.seed && a.rng == b.rng && a.camera == b.camera &&
         a.best_progress == b.best_progress;
}

namespace {

struct Support {
  double height = 0.0;
  const ObjectInstance* object = nullptr;  // nullptr: the table
};

// An object rests on the highest body whose footprint, dilated by half the
// placed object's radius, contains the placement point.
Support support_at(const WorldState& state, std::string_view moving, double x, double y, double radius) {
  Support best;
  for (const auto& o : state.objects) {
    if (o.instance_name == moving || (state.held && *state.held == o.instance_name)) continue;
    if (std::hypot(x - o.x, y - o.y) < o.footprint_radius + 0.5 * radius && o.rest_top() > best.height) {
      best.height = o.rest_top();
      best.object = &o;
    }
  }
  return best;
}

bool supports_something(const WorldState& state, const ObjectInstance& obj) {
  return std::any_of(state.objects.begin(), state.objects.end(), [&](const ObjectInstance& o) {
    if (&o == &obj || (state.held && *state.held == o.instance_name)) return false;
    return o.base_z >= obj.rest_top() - kRestTolerance && o.base_z > obj.base_z + kRestTolerance &&
           std::hypot(o.x - obj.x, o.y - obj.y) < obj.footprint_radius + 0.5 * o.footprint_radius;
  });
}

// Topmost graspable object within grasp tolerance of (x, y) that has nothing
// resting on it.
ObjectInstance* graspable_at(WorldState& state, double x, double y) {
  ObjectInstance* best = nullptr;
  for (auto& o : state.objects) {
    if (!o.graspable || std::hypot(x - o.x, y - o.y) > kGraspTolerance) continue;
    if (!best || o.base_z > best->base_z) best = &o;
  }
  if (best && supports_something(state, *best)) return nullptr;
  return best;
}

// Moves `obj` to rest at (x, y, yaw). Refuses to put a disk on a smaller disk.
bool place(WorldState& state, ObjectInstance& obj, double x, double y, double yaw) {
  const Support s = support_at(state, obj.instance_name, x, y, obj.footprint_radius);
  if (obj.shape == Shape::disk && s.object && s.object->shape == Shape::disk &&
      s.object->footprint_radius < obj.footprint_radius)
    return false;
  obj.x = x;
  obj.y = y;
  obj.yaw = wrap_angle(yaw);
  obj.base_z = s.height;
  return true;
}

void require_in_workspace(const Workspace& ws, const Pose2& p, const char* which) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.yaw) || !ws.contains(p.x, p.y))
    throw Error("OUT_OF_WORKSPACE", std::string(which) + " lies outside the workspace");
}

StepResult finish_step(WorldState next, bool effective) {
  next.step_index += 1;
  const std::size_t total = next.spec->goal_conditions.size();
  const std::size_t progress = goal_progress(next);
  double reward = 0.0;
  if (progress > next.best_progress) {
    reward = static_cast<double>(progress - next.best_progress) / static_cast<double>(total);
    next.best_progress = progress;
  }
  StepResult out;
  out.done = check_success(next);
  out.reward = reward;
  out.effective = effective;
  out.observation = observe(next);
  out.state = std::move(next);
  return out;
}

}  // namespace

ResetResult reset(const TaskSpec& spec, std::uint64_t seed, const CameraConfig& camera, const SimOptions& options) {
  camera.check();
  const ObjectRegistry& registry = options.registry ? *options.registry : ObjectRegistry::active();
  const auto diags = validate(spec, registry);
  for (const auto& d : diags)
    if (d.severity == Severity::error) throw Error("INVALID_SPEC", format_diagnostic(d));

  const ScenePlacement scene = sample_scene(spec, seed, options.clearance, registry);

  WorldState state;
  state.seed = seed;
  state.rng = Rng(seed);
  state.spec = std::make_shared<const TaskSpec>(spec);
  state.camera = camera;

  auto instantiate = [&](const std::string& name) -> ObjectInstance& {
    const Declaration* decl = spec.find_instance(name);
    const ObjectClass& cls = registry.at(decl->class_name);
    ObjectInstance o;
    o.instance_name = name;
    o.class_name = cls.class_name;
    o.footprint_radius = cls.footprint_radius;
    o.height = cls.height;
    o.rest_height = cls.rest_height;
    o.color = cls.color;
    o.shape = cls.shape;
    o.graspable = spec.find_object(name) != nullptr;
    state.objects.push_back(std::move(o));
    return state.objects.back();
  };

  for (const auto& p : scene.placements) {
    ObjectInstance& o = instantiate(p.instance_name);
    o.x = p.x;
    o.y = p.y;
    o.yaw = p.yaw;
  }
  for (const auto& s : scene.stacked) {
    const ObjectInstance support = *state.find(s.support);
    ObjectInstance& o = instantiate(s.instance_name);
    o.x = support.x;
    o.y = support.y;
    o.yaw = support.yaw;
    o.base_z = support_at(state, o.instance_name, o.x, o.y, o.footprint_radius).height;
  }
  state.best_progress = goal_progress(state);

  ResetResult out;
  out.observation = observe(state);
  out.state = std::move(state);
  return out;
}

StepResult step(const WorldState& state, const ActionPrimitive& action) {
  const Workspace& ws = state.camera.workspace;
  require_in_workspace(ws, action.pick_pose, "pick pose");
  require_in_workspace(ws, action.place_pose, "place pose");

  WorldState next = state;
  ObjectInstance* target = next.held ? nullptr : graspable_at(next, action.pick_pose.x, action.pick_pose.y);
  bool effective = false;
  if (target && place(next, *target, action.place_pose.x, action.place_pose.y, action.place_pose.yaw)) {
    next.gripper.x = action.place_pose.x;
    next.gripper.y = action.place_pose.y;
    next.gripper.yaw = wrap_angle(action.place_pose.yaw);
    next.gripper.closed = false;
    effective = true;
  }
  return finish_step(std::move(next), effective);
}

StepResult step(const WorldState& state, const GripperCommand& command) {
  const Workspace& ws = state.camera.workspace;
  WorldState next = state;
  Gripper& g = next.gripper;
  const Gripper before = g;
  g.x = std::clamp(g.x + command.dx, ws.x_min, ws.x_max);
  g.y = std::clamp(g.y + command.dy, ws.y_min, ws.y_max);
  g.z = std::clamp(g.z + command.dz, ws.z_min, ws.z_max);
  g.yaw = wrap_angle(g.yaw + command.dyaw);

  bool effective = !(g == before);
  if (next.held) {
    ObjectInstance* obj = next.find(*next.held);
    obj->x = g.x;
    obj->y = g.y;
    obj->yaw = g.yaw;
    obj->base_z = g.z;
  }
  if (command.grip == Grip::close && !g.closed) {
    g.closed = true;
    effective = true;
    if (!next.held) {
      if (ObjectInstance* obj = graspable_at(next, g.x, g.y)) {
        next.held = obj->instance_name;
        obj->base_z = g.z;
      }
    }
  } else if (command.grip == Grip::open && g.closed) {
    effective = true;
    if (next.held) {
      ObjectInstance* obj = next.find(*next.held);
      const std::string name = *next.held;
      next.held.reset();
      if (place(next, *obj, g.x, g.y, g.yaw)) {
        g.closed = false;
      } else {
        next.held = name;  // refused release; keep holding
      }
    } else {
      g.closed = false;
    }
  }
  return finish_step(std::move(next), effective);
}

// ---------------------------------------------------------------------------
// Predicates

namespace {

double rest_height_of_target(const WorldState& state, std::string_view target, bool& found_object,
                             const ObjectInstance*& obj, const Region*& region) {
  obj = state.find(target);
  region = nullptr;
  found_object = obj != nullptr;
  if (!obj) region = state.spec->find_region(target);
  return obj ? obj->rest_top() : 0.0;
}

}  // namespace

bool evaluate(const WorldState& state, const Predicate& p) {
  if (p.relation != Relation::On && p.relation != Relation::In) return false;
  if (p.args.size() != 2) return false;
  if (state.held && *state.held == p.args[0]) return false;
  const ObjectInstance* a = state.find(p.args[0]);
  if (!a) return false;

  bool is_object = false;
  const ObjectInstance* b = nullptr;
  const Region* region = nullptr;
  const double rest = rest_height_of_target(state, p.args[1], is_object, b, region);
  if (is_object) {
    if (b == a) return false;
    if (std::hypot(a->x - b->x, a->y - b->y) > b->footprint_radius + 1e-9) return false;
    if (p.relation == Relation::In) return a->base_z >= rest - kRestTolerance;
    if (std::abs(a->base_z - rest) > kRestTolerance) return false;
    if (b->shape == Shape::slot && std::abs(wrap_angle(a->yaw - b->yaw)) > kSlotYawTolerance) return false;
    return true;
  }
  if (region) return region->contains(a->x, a->y);
  // A fixture that was never positioned (e.g. the table itself): resting on it
  // means resting at table height.
  if (state.spec->find_fixture(p.args[1])) return a->base_z <= kRestTolerance;
  return false;
}

std::size_t goal_progress(const WorldState& state) {
  std::size_t n = 0;
  for (const auto& p : state.spec->goal_conditions)
    if (evaluate(state, p)) ++n;
  return n;
}

bool check_success(const WorldState& state) {
  return goal_progress(state) == state.spec->goal_conditions.size();
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct Surface {
  bool covered = false;
  double top = 0.0;
  bool floor = false;  // inside a container: shaded darker
};

Surface surface_at(const ObjectInstance& o, double wx, double wy) {
  const double dx = wx - o.x;
  const double dy = wy - o.y;
  const double c = std::cos(o.yaw), s = std::sin(o.yaw);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double r = o.footprint_radius;
  const double half = r / std::numbers::sqrt2;
  const double d2 = dx * dx + dy * dy;
  switch (o.shape) {
    case Shape::disc:
    case Shape::disk:
    case Shape::peg:
      if (d2 <= r * r) return {true, o.top(), false};
      return {};
    case Shape::square:
      if (std::abs(lx) <= half && std::abs(ly) <= half) return {true, o.top(), false};
      return {};
    case Shape::l_block: {
      const double w = 0.8 * half;
      const bool bar = lx >= -half && lx <= half && ly >= -half && ly <= -half + w;
      const bool stem = lx >= -half && lx <= -half + w && ly >= -half && ly <= half;
      if (bar || stem) return {true, o.top(), false};
      return {};
    }
    case Shape::slot: {
      const double inner = 0.75 * half;
      const bool outer_hit = std::abs(lx) <= half && std::abs(ly) <= half;
      const bool inner_hit = std::abs(lx) < inner && std::abs(ly) < inner;
      if (outer_hit && !inner_hit) return {true, o.top(), false};
      return {};
    }
    case Shape::container: {
      if (d2 > r * r) return {};
      const double inner = 0.8 * r;
      if (d2 >= inner * inner) return {true, o.top(), false};
      return {true, o.rest_top(), true};
    }
  }
  return {};
}

}  // namespace

std::pair<RgbImage, DepthImage> render(const WorldState& state, const CameraConfig& camera) {
  camera.check();
  const Workspace& ws = camera.workspace;
  const std::uint32_t W = camera.width, H = camera.height;
  RgbImage rgb{H, W, std::vector<std::uint8_t>(std::size_t{H} * W * 3)};
  DepthImage depth{H, W, std::vector<float>(std::size_t{H} * W, static_cast<float>(camera.camera_height))};
  std::vector<double> top(std::size_t{H} * W, 0.0);
  for (std::size_t i = 0; i < std::size_t{H} * W; ++i)
    std::copy(camera.background.begin(), camera.background.end(), rgb.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3));

  const double px = (ws.x_max - ws.x_min) / W;  // meters per column
  const double py = (ws.y_max - ws.y_min) / H;  // meters per row
  // Painter's order: lower tops first, later (higher) surfaces overwrite.
  std::vector<const ObjectInstance*> order;
  for (const auto& o : state.objects) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(),
                   [](const ObjectInstance* a, const ObjectInstance* b) { return a->top() < b->top(); });

  for (const ObjectInstance* o : order) {
    const double r = o->footprint_radius;
    const auto col_lo = static_cast<long>(std::floor((o->x - r - ws.x_min) / px));
    const auto col_hi = static_cast<long>(std::ceil((o->x + r - ws.x_min) / px));
    const auto row_lo = static_cast<long>(std::floor((ws.y_max - (o->y + r)) / py));
    const auto row_hi = static_cast<long>(std::ceil((ws.y_max - (o->y - r)) / py));
    for (long row = std::max(0L, row_lo); row <= std::min<long>(H - 1, row_hi); ++row) {
      const double wy = ws.y_max - (static_cast<double>(row) + 0.5) * py;
      for (long col = std::max(0L, col_lo); col <= std::min<long>(W - 1, col_hi); ++col) {
        const double wx = ws.x_min + (static_cast<double>(col) + 0.5) * px;
        const Surface s = surface_at(*o, wx, wy);
        const std::size_t idx = static_cast<std::size_t>(row) * W + static_cast<std::size_t>(col);
        if (!s.covered || s.top < top[idx]) continue;
        top[idx] = s.top;
        depth.values[idx] = static_cast<float>(camera.camera_height - s.top);
        std::uint8_t* p = &rgb.pixels[idx * 3];
        for (int ch = 0; ch < 3; ++ch)
          p[ch] = s.floor ? static_cast<std::uint8_t>(o->color[ch] * 7 / 10) : o->color[ch];
      }
    }
  }
  return {std::move(rgb), std::move(depth)};
}

Observation observe(const WorldState& state) {
  Observation obs;
  auto [rgb, depth] = render(state, state.camera);
  obs.rgb = std::move(rgb);
  obs.depth = std::move(depth);
  for (const auto& o : state.objects) obs.object_poses.push_back({o.instance_name, o.x, o.y, o.yaw, o.base_z});
  obs.instruction = state.spec ? state.spec->language_instruction : std::string{};
  return obs;
}

}  // namespace demoforge

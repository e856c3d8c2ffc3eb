#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "demoforge/error.hpp"
#include "demoforge/simworld.hpp"
#include "demoforge/tasks.hpp"

using namespace demoforge;

namespace {

constexpr const char* kPuckRegistry = R"({
  "version": 1,
  "classes": [
    {"class": "table", "category": "fixture", "shape": "square", "footprint_radius": 0.35, "height": 0.001, "rest_height": 0.0, "color": [90, 90, 90]},
    {"class": "puck", "category": "object", "shape": "disc", "footprint_radius": 0.03, "height": 0.04, "rest_height": 0.04, "color": [230, 20, 20]}
  ]
})";

TaskSpec puck_spec(bool with_puck) {
  std::string text = R"((define (problem puck) (:domain test)
    (:regions (spot (:target main_table) (:ranges ((0.05 -0.05 0.05 -0.05))) (:yaw_rotation ((0.3 0.3)))))
    (:fixtures main_table - table))";
  if (with_puck) text += "(:objects puck_1 - puck) (:init (On puck_1 main_table_spot))";
  text += ")";
  return parse_task_spec_or_throw(text);
}

// Pixel whose centre is nearest to (x, y) under the orthographic top-down map.
std::pair<std::uint32_t, std::uint32_t> project(const CameraConfig& cam, double x, double y) {
  const auto& ws = cam.workspace;
  const double col = (x - ws.x_min) / (ws.x_max - ws.x_min) * cam.width - 0.5;
  const double row = (ws.y_max - y) / (ws.y_max - ws.y_min) * cam.height - 0.5;
  return {static_cast<std::uint32_t>(std::lround(row)), static_cast<std::uint32_t>(std::lround(col))};
}

ActionPrimitive region_move(const WorldState& w, const std::string& obj, const Region& r) {
  const ObjectInstance* o = w.find(obj);
  return {{o->x, o->y, o->yaw}, {0.5 * (r.x_min + r.x_max), 0.5 * (r.y_min + r.y_max), 0.0}};
}

}  // namespace

TEST_CASE("reset: deterministic frames for a fixed seed") {
  for (const TaskKind k : kAllTasks) {
    const TaskSpec spec = builtin_task_spec(k);
    const auto a = reset(spec, 1234);
    const auto b = reset(spec, 1234);
    CHECK(a.state == b.state);
    CHECK(a.observation.rgb == b.observation.rgb);
    CHECK(a.observation.depth == b.observation.depth);
    CHECK(a.state.step_index == 0);
    CHECK(a.observation.instruction == spec.language_instruction);
  }
}

TEST_CASE("reset: block insertion holds one l_block and one slot") {
  const auto [state, obs] = reset(builtin_task_spec(TaskKind::block_insertion), 5);
  int blocks = 0, slots = 0;
  for (const auto& o : state.objects) {
    blocks += o.shape == Shape::l_block;
    slots += o.shape == Shape::slot;
  }
  CHECK(blocks == 1);
  CHECK(slots == 1);
}

TEST_CASE("reset: different seeds give different scenes") {
  const TaskSpec spec = builtin_task_spec(TaskKind::place_red_in_green);
  int differ = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto a = reset(spec, 2 * i);
    const auto b = reset(spec, 2 * i + 1);
    differ += a.observation.object_poses != b.observation.object_poses;
  }
  CHECK(differ >= 99);
}

TEST_CASE("reset: rejects invalid specs and tiny cameras") {
  TaskSpec spec = builtin_task_spec(TaskKind::block_insertion);
  spec.objects[0].class_name = "unobtainium";
  CHECK_THROWS_WITH_AS(reset(spec, 0), doctest::Contains("INVALID_SPEC"), Error);
  CameraConfig cam;
  cam.width = 8;
  CHECK_THROWS_WITH_AS(reset(builtin_task_spec(TaskKind::block_insertion), 0, cam), doctest::Contains("BAD_CAMERA"),
                       Error);
}

TEST_CASE("step: a pick far from every object is a no-op") {
  const auto [state, obs] = reset(builtin_task_spec(TaskKind::stack_block_pyramid), 3);
  const auto r = step(state, ActionPrimitive{{0.24, 0.24, 0}, {0.0, 0.0, 0}});
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done);
  CHECK_FALSE(r.effective);
  WorldState expected = state;
  expected.step_index = 1;
  CHECK(r.state == expected);
  CHECK(r.observation.rgb == obs.rgb);
}

TEST_CASE("step: poses outside the workspace are rejected") {
  const auto [state, obs] = reset(builtin_task_spec(TaskKind::block_insertion), 3);
  CHECK_THROWS_WITH_AS(step(state, ActionPrimitive{{0.0, 0.0, 0}, {0.3, 0.0, 0}}),
                       doctest::Contains("OUT_OF_WORKSPACE"), Error);
}

TEST_CASE("step: pyramid placements pay 1/6 each and complete at 1.0") {
  const TaskSpec spec = builtin_task_spec(TaskKind::stack_block_pyramid);
  auto [state, obs] = reset(spec, 17);
  CHECK_FALSE(check_success(state));
  double cumulative = 0.0;
  for (std::size_t i = 0; i < spec.goal_conditions.size(); ++i) {
    const auto& goal = spec.goal_conditions[i];
    auto r = step(state, region_move(state, goal.args[0], *spec.find_region(goal.args[1])));
    CHECK(r.reward == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    cumulative += r.reward;
    CHECK(r.done == (i + 1 == spec.goal_conditions.size()));
    state = std::move(r.state);
  }
  CHECK(std::abs(cumulative - 1.0) < 1e-6);
  CHECK(check_success(state));
  // The top block rests on the middle row: three block heights up.
  CHECK(state.find("purple_block_1")->base_z == doctest::Approx(0.08));
}

TEST_CASE("step: a larger disk never lands on a smaller one") {
  auto [state, obs] = reset(builtin_task_spec(TaskKind::towers_of_hanoi), 8);
  const auto* a = state.find("peg_a");
  const auto* b = state.find("peg_b");
  const auto* c = state.find("peg_c");
  // small a->b, then medium a->b would violate the ordering.
  auto r1 = step(state, ActionPrimitive{{a->x, a->y, 0}, {b->x, b->y, 0}});
  CHECK(r1.effective);
  auto r2 = step(r1.state, ActionPrimitive{{a->x, a->y, 0}, {b->x, b->y, 0}});
  CHECK_FALSE(r2.effective);
  CHECK(r2.reward == 0.0);
  CHECK(r2.state.objects == r1.state.objects);
  // medium a->c is fine.
  auto r3 = step(r2.state, ActionPrimitive{{a->x, a->y, 0}, {c->x, c->y, 0}});
  CHECK(r3.effective);
}

TEST_CASE("render: empty world is uniform background at camera height") {
  const auto reg = ObjectRegistry::from_json(kPuckRegistry);
  SimOptions opts;
  opts.registry = &reg;
  const auto [state, obs] = reset(puck_spec(false), 0, CameraConfig{}, opts);
  CHECK(state.objects.empty());
  const CameraConfig cam;
  for (std::size_t i = 0; i < obs.depth.values.size(); ++i) {
    CHECK(obs.depth.values[i] == static_cast<float>(cam.camera_height));
    CHECK(obs.rgb.pixels[i * 3 + 0] == cam.background[0]);
    CHECK(obs.rgb.pixels[i * 3 + 1] == cam.background[1]);
    CHECK(obs.rgb.pixels[i * 3 + 2] == cam.background[2]);
  }
}

TEST_CASE("render: analytic depth and colour at an object's centre") {
  const auto reg = ObjectRegistry::from_json(kPuckRegistry);
  SimOptions opts;
  opts.registry = &reg;
  CameraConfig cam;
  cam.camera_height = 2.0;
  cam.width = 200;
  cam.height = 200;
  const auto [state, obs] = reset(puck_spec(true), 0, cam, opts);
  const auto [row, col] = project(cam, 0.05, -0.05);
  CHECK(obs.depth.at(row, col) == doctest::Approx(1.96).epsilon(1e-6));
  const std::uint8_t* px = obs.rgb.at(row, col);
  CHECK(px[0] > px[1]);
  CHECK(px[0] > px[2]);
  // Away from the puck the table shows through.
  const auto [r2, c2] = project(cam, -0.2, 0.2);
  CHECK(obs.depth.at(r2, c2) == 2.0f);
}

TEST_CASE("render: depth stays within [camera_height - tallest top, camera_height]") {
  for (const TaskKind k : kAllTasks) {
    const auto [state, obs] = reset(builtin_task_spec(k), 21);
    double tallest = 0;
    for (const auto& o : state.objects) tallest = std::max(tallest, o.top());
    for (const float d : obs.depth.values) {
      CHECK(d <= static_cast<float>(state.camera.camera_height));
      CHECK(d >= static_cast<float>(state.camera.camera_height - tallest) - 1e-6f);
    }
  }
}

TEST_CASE("check_success: hand-built states") {
  const TaskSpec spec = builtin_task_spec(TaskKind::place_red_in_green);
  auto [state, obs] = reset(spec, 4);
  CHECK_FALSE(check_success(state));
  const ObjectInstance bowl = *state.find("green_bowl_1");
  for (const char* name : {"red_block_1", "red_block_2"}) {
    ObjectInstance* o = state.find(name);
    o->x = bowl.x;
    o->y = bowl.y;
    o->base_z = bowl.rest_top();
  }
  CHECK(check_success(state));
  WorldState perturbed = state;
  perturbed.find("red_block_2")->x += 2.0 * bowl.footprint_radius;
  CHECK_FALSE(check_success(perturbed));
}

TEST_CASE("check_success: slot insertion needs yaw alignment") {
  auto [state, obs] = reset(builtin_task_spec(TaskKind::block_insertion), 9);
  const ObjectInstance slot = *state.find("slot_1");
  ObjectInstance* block = state.find("l_block_1");
  block->x = slot.x;
  block->y = slot.y;
  block->yaw = slot.yaw;
  CHECK(check_success(state));
  block->yaw = slot.yaw + 2.0 * kSlotYawTolerance;
  CHECK_FALSE(check_success(state));
}

TEST_CASE("check_success: initial states never satisfy the goal") {
  for (const TaskKind k : kAllTasks)
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto r = reset(builtin_task_spec(k), seed);
      CHECK_FALSE(check_success(r.state));
      CHECK(r.state.best_progress == 0);
    }
}

TEST_CASE("properties: random primitive rollouts") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(-0.25, 0.25);
  for (const TaskKind k : kAllTasks) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TaskSpec spec = builtin_task_spec(k);
      auto [state, obs] = reset(spec, seed);
      std::multiset<std::string> names;
      for (const auto& o : state.objects) names.insert(o.instance_name);
      std::vector<ActionPrimitive> actions;
      double cumulative = 0;
      WorldState cur = state;
      std::vector<WorldState> trajectory;
      for (int t = 0; t < 30; ++t) {
        ActionPrimitive a;
        const auto& o = cur.objects[rng() % cur.objects.size()];
        a.pick_pose = rng() % 4 ? Pose2{o.x, o.y, 0} : Pose2{coord(rng), coord(rng), 0};
        a.place_pose = {coord(rng), coord(rng), coord(rng)};
        actions.push_back(a);
        auto r = step(cur, a);
        CHECK(r.reward >= 0.0);
        CHECK(r.reward <= 1.0);
        cumulative += r.reward;
        CHECK(cumulative <= 1.0 + 1e-9);
        if (r.done) CHECK(check_success(r.state));
        CHECK(r.state.step_index == cur.step_index + 1);
        std::multiset<std::string> now;
        for (const auto& obj : r.state.objects) now.insert(obj.instance_name);
        CHECK(now == names);
        cur = std::move(r.state);
        trajectory.push_back(cur);
      }
      // Replaying the same actions reproduces the trajectory exactly.
      WorldState replay = reset(spec, seed).state;
      for (std::size_t t = 0; t < actions.size(); ++t) {
        auto r = step(replay, actions[t]);
        CHECK(r.state == trajectory[t]);
        replay = std::move(r.state);
      }
    }
  }
}

TEST_CASE("continuous control: grasp, carry and release") {
  auto [state, obs] = reset(builtin_task_spec(TaskKind::block_insertion), 2);
  const ObjectInstance block = *state.find("l_block_1");
  const ObjectInstance slot = *state.find("slot_1");
  state.gripper.x = block.x;
  state.gripper.y = block.y;
  state.gripper.yaw = block.yaw;
  auto r = step(state, GripperCommand{0, 0, 0, 0, 0, 0, Grip::close});
  REQUIRE(r.state.held);
  CHECK(*r.state.held == "l_block_1");
  CHECK_FALSE(check_success(r.state));
  GripperCommand carry;
  carry.dx = slot.x - block.x;
  carry.dy = slot.y - block.y;
  carry.dyaw = wrap_angle(slot.yaw - block.yaw);
  r = step(r.state, carry);
  CHECK(r.state.find("l_block_1")->x == doctest::Approx(slot.x));
  r = step(r.state, GripperCommand{0, 0, 0, 0, 0, 0, Grip::open});
  CHECK_FALSE(r.state.held);
  CHECK(r.done);
  CHECK(r.reward == doctest::Approx(1.0));
}

TEST_CASE("continuous control: gripper is clamped to the workspace") {
  auto [state, obs] = reset(builtin_task_spec(TaskKind::block_insertion), 2);
  auto r = step(state, GripperCommand{5.0, -5.0, 5.0, 0, 0, 0, Grip::hold});
  CHECK(r.state.gripper.x == state.camera.workspace.x_max);
  CHECK(r.state.gripper.y == state.camera.workspace.y_min);
  CHECK(r.state.gripper.z == state.camera.workspace.z_max);
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  for (double a = -20; a < 20; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -std::numbers::pi);
    CHECK(w <= std::numbers::pi);
  }
}

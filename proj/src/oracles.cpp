#include "demoforge/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "demoforge/error.hpp"

namespace demoforge {

namespace {

bool is_red(const Rgb& c) { return c[0] >= 150 && c[1] < 100 && c[2] < 100; }
bool is_green(const Rgb& c) { return c[1] >= 150 && c[0] < 100 && c[2] < 120; }

ActionPrimitive move(const ObjectInstance& obj, double x, double y, double yaw) {
  return {{obj.x, obj.y, obj.yaw}, {x, y, yaw}};
}

std::vector<ActionPrimitive> plan_block_insertion(const WorldState& w) {
  const ObjectInstance* block = nullptr;
  const ObjectInstance* slot = nullptr;
  for (const auto& o : w.objects) {
    if (o.graspable && o.shape == Shape::l_block && !block) block = &o;
    if (o.shape == Shape::slot && !slot) slot = &o;
  }
  if (!block || !slot) return {};
  const Predicate inserted{Relation::On, {block->instance_name, slot->instance_name}, {}};
  if (evaluate(w, inserted)) return {};
  return {move(*block, slot->x, slot->y, slot->yaw)};
}

std::vector<ActionPrimitive> plan_place_red_in_green(const WorldState& w) {
  const ObjectInstance* bowl = nullptr;
  for (const auto& o : w.objects)
    if (o.shape == Shape::container && is_green(o.color)) {
      bowl = &o;
      break;
    }
  if (!bowl) return {};
  std::vector<ActionPrimitive> plan;
  for (const auto& o : w.objects) {
    if (!o.graspable || !is_red(o.color)) continue;
    if (evaluate(w, {Relation::In, {o.instance_name, bowl->instance_name}, {}})) continue;
    plan.push_back(move(o, bowl->x, bowl->y, o.yaw));
  }
  return plan;
}

std::vector<ActionPrimitive> plan_towers_of_hanoi(const WorldState& w) {
  std::vector<const ObjectInstance*> pegs, disks;
  for (const auto& o : w.objects) {
    if (o.shape == Shape::peg) pegs.push_back(&o);
    if (o.graspable && o.shape == Shape::disk) disks.push_back(&o);
  }
  if (pegs.size() != 3 || disks.empty()) return {};
  std::sort(disks.begin(), disks.end(), [](const ObjectInstance* a, const ObjectInstance* b) {
    return a->footprint_radius < b->footprint_radius;
  });

  auto peg_index = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < pegs.size(); ++i)
      if (pegs[i]->instance_name == name) return static_cast<int>(i);
    return -1;
  };
  int target = -1;
  for (const auto& g : w.spec->goal_conditions)
    if (g.args.size() == 2 && (target = peg_index(g.args[1])) >= 0) break;
  if (target < 0) return {};

  std::vector<int> positions;
  for (const ObjectInstance* d : disks) {
    int nearest = 0;
    for (std::size_t i = 1; i < pegs.size(); ++i)
      if (std::hypot(d->x - pegs[i]->x, d->y - pegs[i]->y) <
          std::hypot(d->x - pegs[nearest]->x, d->y - pegs[nearest]->y))
        nearest = static_cast<int>(i);
    positions.push_back(nearest);
  }
  std::vector<ActionPrimitive> plan;
  for (const auto& [from, to] : hanoi_moves(positions, target))
    plan.push_back({{pegs[from]->x, pegs[from]->y, 0.0}, {pegs[to]->x, pegs[to]->y, 0.0}});
  return plan;
}

// Goals are taken in listed order; the shipped pyramid lists the bottom row
// left to right, then the middle row, then the top.
std::vector<ActionPrimitive> plan_stack_block_pyramid(const WorldState& w) {
  std::vector<ActionPrimitive> plan;
  for (const auto& g : w.spec->goal_conditions) {
    if (g.relation != Relation::On || g.args.size() != 2) continue;
    const ObjectInstance* block = w.find(g.args[0]);
    const Region* region = w.spec->find_region(g.args[1]);
    if (!block || !region || evaluate(w, g)) continue;
    plan.push_back(move(*block, 0.5 * (region->x_min + region->x_max), 0.5 * (region->y_min + region->y_max),
                        0.5 * (region->yaw_min + region->yaw_max)));
  }
  return plan;
}

}  // namespace

std::vector<std::pair<int, int>> hanoi_moves(std::vector<int> positions, int target_peg) {
  std::vector<std::pair<int, int>> moves;
  std::function<void(int, int)> solve = [&](int k, int target) {
    if (k < 0) return;
    if (positions[static_cast<std::size_t>(k)] == target) {
      solve(k - 1, target);
      return;
    }
    const int other = 3 - positions[static_cast<std::size_t>(k)] - target;
    solve(k - 1, other);
    moves.emplace_back(positions[static_cast<std::size_t>(k)], target);
    positions[static_cast<std::size_t>(k)] = target;
    solve(k - 1, target);
  };
  solve(static_cast<int>(positions.size()) - 1, target_peg);
  return moves;
}

std::vector<ActionPrimitive> plan_task(TaskKind kind, const WorldState& state) {
  switch (kind) {
    case TaskKind::block_insertion: return plan_block_insertion(state);
    case TaskKind::place_red_in_green: return plan_place_red_in_green(state);
    case TaskKind::towers_of_hanoi: return plan_towers_of_hanoi(state);
    case TaskKind::stack_block_pyramid: return plan_stack_block_pyramid(state);
  }
  return {};
}

Oracle::Oracle(TaskKind task_kind, const WorldState& reset_state) : world_(reset_state) {
  state_.task_kind = task_kind;
  state_.plan = plan_task(task_kind, world_);
}

void Oracle::replan() {
  state_.plan = plan_task(state_.task_kind, world_);
  state_.plan_cursor = 0;
}

ActionPrimitive Oracle::act(const Observation& observation) {
  for (const auto& pose : observation.object_poses) {
    if (ObjectInstance* o = world_.find(pose.name)) {
      o->x = pose.x;
      o->y = pose.y;
      o->yaw = pose.yaw;
      o->base_z = pose.z;
    }
  }
  if (check_success(world_)) throw Error("NO_ACTION", "goal already satisfied");
  const bool no_effect = poses_at_last_action_ && *poses_at_last_action_ == observation.object_poses;
  if (no_effect || state_.plan_cursor >= state_.plan.size()) replan();
  if (state_.plan_cursor >= state_.plan.size()) throw Error("NO_ACTION", "nothing left to do");
  poses_at_last_action_ = observation.object_poses;
  return state_.plan[state_.plan_cursor++];
}

HarnessReport run_harness(TaskKind kind, std::size_t episodes, std::uint64_t seed, const HarnessOptions& options) {
  if (episodes == 0) throw Error("BAD_ARGUMENT", "episodes must be at least 1");
  const TaskSpec spec = options.spec ? *options.spec : builtin_task_spec(kind);

  struct Outcome {
    bool success = false;
    std::size_t steps = 0;
  };
  std::vector<Outcome> outcomes(episodes);
  auto run_episode = [&](std::size_t i) {
    auto [state, obs] = reset(spec, derive_episode_seed(seed, task_index(kind), i), options.camera);
    Oracle oracle(kind, state);
    Outcome& out = outcomes[i];
    while (out.steps < options.max_steps) {
      ActionPrimitive action;
      try {
        action = oracle.act(obs);
      } catch (const Error& e) {
        if (e.code() != "NO_ACTION") throw;
        break;
      }
      auto result = step(state, action);
      ++out.steps;
      state = std::move(result.state);
      obs = std::move(result.observation);
      if (result.done) break;
    }
    out.success = check_success(state);
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, episodes);
  if (workers == 1) {
    for (std::size_t i = 0; i < episodes; ++i) run_episode(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < episodes; i += workers) run_episode(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  HarnessReport report;
  report.task_kind = kind;
  report.episodes = episodes;
  std::size_t total_steps = 0;
  for (const auto& o : outcomes) {
    report.successes += o.success ? 1 : 0;
    total_steps += o.steps;
  }
  report.success_rate = static_cast<double>(report.successes) / static_cast<double>(episodes);
  report.mean_steps = static_cast<double>(total_steps) / static_cast<double>(episodes);
  return report;
}

}  // namespace demoforge

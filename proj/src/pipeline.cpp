#include "demoforge/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "demoforge/error.hpp"

namespace demoforge {

namespace fs = std::filesystem;

EpisodeSummary record_oracle_episode(const fs::path& root, TaskKind kind, const TaskSpec& spec,
                                     std::uint32_t episode_id, std::uint64_t seed, const CameraConfig& camera,
                                     std::size_t max_steps) {
  auto [state, obs] = reset(spec, seed, camera);
  Oracle oracle(kind, state);
  EpisodeSummary summary{episode_id, seed, 0, 0, false};
  double reward_in = 0.0;
  std::uint32_t t = 0;
  while (summary.primitives < max_steps) {
    ActionPrimitive action;
    try {
      action = oracle.act(obs);
    } catch (const Error& e) {
      if (e.code() != "NO_ACTION") throw;
      break;
    }
    save_step(root, make_step_record(episode_id, t++, state, obs, action, reward_in));
    auto r = step(state, action);
    ++summary.primitives;
    reward_in = r.reward;
    state = std::move(r.state);
    obs = std::move(r.observation);
    if (r.done) break;
  }
  save_step(root, make_step_record(episode_id, t++, state, obs, std::monostate{}, reward_in));
  summary.records = t;
  summary.success = check_success(state);
  return summary;
}

namespace {

TaskGenReport generate_task(TaskKind kind, const TaskSpec& spec, const GenConfig& config) {
  TaskGenReport out;
  out.root = config.out / std::string(task_name(kind));
  std::error_code ec;
  fs::create_directories(out.root, ec);
  if (ec) throw Error("IO_FAILURE", "cannot create " + out.root.string() + ": " + ec.message());

  out.episodes.resize(config.episodes);
  auto run = [&](std::size_t i) {
    const std::uint64_t seed = derive_episode_seed(config.seed, task_index(kind), i);
    try {
      out.episodes[i] = record_oracle_episode(out.root, kind, spec, static_cast<std::uint32_t>(i), seed,
                                              config.camera, config.max_steps);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("task ") + std::string(task_name(kind)) + " episode " + std::to_string(i) +
                                ": " + e.what());
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, config.episodes);
  if (workers == 1) {
    for (std::size_t i = 0; i < config.episodes; ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < config.episodes; i += workers) run(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  out.report.task_kind = kind;
  out.report.episodes = config.episodes;
  std::size_t primitives = 0;
  for (const auto& e : out.episodes) {
    out.report.successes += e.success;
    primitives += e.primitives;
  }
  out.report.success_rate = static_cast<double>(out.report.successes) / static_cast<double>(config.episodes);
  out.report.mean_steps = static_cast<double>(primitives) / static_cast<double>(config.episodes);
  return out;
}

}  // namespace

std::vector<TaskGenReport> generate(const GenConfig& config) {
  if (config.episodes == 0) throw Error("BAD_ARGUMENT", "episodes must be at least 1");
  if (config.tasks.empty()) throw Error("BAD_ARGUMENT", "no tasks given");
  if (config.spec && config.tasks.size() != 1) throw Error("BAD_ARGUMENT", "a spec override needs exactly one task");
  config.camera.check();
  std::vector<TaskGenReport> reports;
  for (TaskKind kind : config.tasks)
    reports.push_back(generate_task(kind, config.spec ? *config.spec : builtin_task_spec(kind), config));
  return reports;
}

PipelineResult run_pipeline(TaskKind kind, const std::optional<TaskSpec>& spec, std::size_t episodes,
                            std::uint64_t seed, const CameraConfig& camera, const GatherConfig& gather_config,
                            const fs::path& out, std::size_t workers) {
  if (episodes == 0) throw Error("BAD_ARGUMENT", "episodes must be at least 1");
  fs::path scratch = out;
  scratch += ".work";
  std::error_code ec;
  fs::remove_all(scratch, ec);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ignored;
      fs::remove_all(dir, ignored);
    }
  } cleanup{scratch};

  GenConfig gen;
  gen.tasks = {kind};
  gen.episodes = episodes;
  gen.seed = seed;
  gen.camera = camera;
  gen.out = scratch;
  gen.spec = spec;
  gen.workers = workers;
  PipelineResult result;
  result.generated = generate(gen).front();
  result.gathered = gather({result.generated.root}, spec ? *spec : builtin_task_spec(kind), gather_config, out);
  return result;
}

}  // namespace demoforge

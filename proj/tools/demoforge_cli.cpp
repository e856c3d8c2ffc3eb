// demoforge command-line front end.
#include <csignal>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "demoforge/aggregator.hpp"
#include "demoforge/error.hpp"
#include "demoforge/pipeline.hpp"
#include "demoforge/tasks.hpp"
#include "demoforge/teleop.hpp"
#include "demoforge/xembody.hpp"
#ifdef DEMOFORGE_HAVE_TELEOP
#include "demoforge/teleop_server.hpp"
#endif

using namespace demoforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool json_output = false;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IO_FAILURE", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TaskSpec load_spec(const fs::path& path) {
  const std::string text = read_text(path);
  ParseResult r = parse_task_spec(text);
  if (!r.ok()) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += "\n" + format_diagnostic(d, path.string());
    throw Error("PARSE_ERROR", path.string() + msg);
  }
  return *r.spec;
}

TaskKind parse_task(const std::string& name) {
  if (auto k = task_from_string(name)) return *k;
  throw Error("UNKNOWN_TASK", "unknown task '" + name + "'");
}

// Task of a spec file: --task wins, else the problem name.
TaskKind task_for(const std::string& task_opt, const TaskSpec& spec) {
  if (!task_opt.empty()) return parse_task(task_opt);
  if (auto k = task_from_string(spec.problem_name)) return *k;
  throw Error("UNKNOWN_TASK", "cannot tell which oracle solves '" + spec.problem_name + "'; pass --task");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CameraConfig scaled_camera(double scale) {
  CameraConfig cam;
  if (!(scale > 0)) throw Error("BAD_ARGUMENT", "--render-scale must be > 0");
  cam.width = static_cast<std::uint32_t>(std::lround(cam.width * scale));
  cam.height = static_cast<std::uint32_t>(std::lround(cam.height * scale));
  cam.check();
  return cam;
}

json report_json(const HarnessReport& r) {
  return {{"task", task_name(r.task_kind)}, {"episodes", r.episodes}, {"successes", r.successes},
          {"success_rate", r.success_rate}, {"mean_steps", r.mean_steps}};
}

void emit(const Globals& g, const json& j, const std::string& human) {
  if (g.json_output) std::cout << j.dump() << "\n";
  else std::cout << human;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic robot-manipulation demonstration generator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Root seed")->capture_default_str();
  app.add_flag("--json", g.json_output, "Machine-readable JSON output");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate oracle episodes (reset, act, step, save)");
  std::vector<std::string> gen_tasks{"block-insertion", "place-red-in-green", "towers-of-hanoi"};
  std::size_t gen_n = 1, gen_workers = 1, gen_max_steps = 64;
  std::string gen_out = "out", gen_spec;
  double render_scale = 1.0;
  gen->add_option("--tasks,--task", gen_tasks, "Tasks to generate")->delimiter(',')->capture_default_str();
  gen->add_option("-n,--episodes", gen_n, "Episodes per task")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--out", gen_out, "Output root")->capture_default_str();
  gen->add_option("--spec", gen_spec, "Task spec replacing the built-in one (single task)");
  gen->add_option("--render-scale", render_scale, "Camera resolution multiplier")->capture_default_str();
  gen->add_option("--workers", gen_workers, "Parallel episode workers")->check(CLI::PositiveNumber);
  gen->add_option("--max-steps", gen_max_steps, "Primitive budget per episode")->check(CLI::PositiveNumber);

  // harness
  auto* harness = app.add_subcommand("harness", "Measure oracle success rates without recording");
  std::vector<std::string> h_tasks{"block-insertion", "place-red-in-green", "towers-of-hanoi", "stack-block-pyramid"};
  std::size_t h_n = 100, h_workers = 1;
  std::string h_spec;
  harness->add_option("--tasks,--task", h_tasks, "Tasks")->delimiter(',')->capture_default_str();
  harness->add_option("-n,--episodes", h_n, "Episodes per task")->check(CLI::PositiveNumber)->capture_default_str();
  harness->add_option("--spec", h_spec, "Task spec replacing the built-in one (single task)");
  harness->add_option("--workers", h_workers, "Parallel workers")->check(CLI::PositiveNumber);

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Check recorded episodes against the dataset rules");
  std::vector<std::string> v_in;
  validate_cmd->add_option("--in", v_in, "Recorder roots or directories of roots")->required();

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "Pack accepted episodes into a dataset container");
  std::vector<std::string> a_in;
  std::string a_spec, a_task, a_out, a_created;
  double a_freq = 20.0;
  aggregate->add_option("--in", a_in, "Recorder roots or directories of roots")->required();
  aggregate->add_option("--spec", a_spec, "Task spec file stored with the dataset");
  aggregate->add_option("--task", a_task, "Built-in task whose spec is stored");
  aggregate->add_option("--out", a_out, "Container file")->required();
  aggregate->add_option("--created-at", a_created, "Creation timestamp (default: now, UTC)");
  aggregate->add_option("--control-freq", a_freq, "Control frequency attribute")->capture_default_str();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print a container index as JSON lines");
  std::string i_in;
  inspect->add_option("--in", i_in, "Container file")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Summarize a dataset container");
  std::string s_in;
  stats->add_option("--in", s_in, "Container file")->required();

  // normalize
  auto* normalize = app.add_subcommand("normalize", "Convert joint trajectories to unified 7-D actions");
  std::string n_emb, n_out;
  std::vector<std::string> n_traj;
  normalize->add_option("--embodiment", n_emb, "Embodiment JSON")->required();
  normalize->add_option("--traj", n_traj, "Joint trajectory (T, n) and optional gripper (T,) array files")
      ->required()
      ->expected(1, 2);
  normalize->add_option("--out", n_out, "Output array file, f64 (T-1, 7)")->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "gen, validate and aggregate in one step");
  std::string p_task, p_spec, p_out, p_created;
  std::size_t p_n = 1, p_workers = 1;
  pipeline->add_option("--task", p_task, "Task to generate");
  pipeline->add_option("--spec", p_spec, "Task spec file");
  pipeline->add_option("-n,--episodes", p_n, "Episodes")->check(CLI::PositiveNumber)->capture_default_str();
  pipeline->add_option("--out", p_out, "Container file")->required();
  pipeline->add_option("--created-at", p_created, "Creation timestamp (default: now, UTC)");
  pipeline->add_option("--render-scale", render_scale, "Camera resolution multiplier");
  pipeline->add_option("--workers", p_workers, "Parallel episode workers")->check(CLI::PositiveNumber);

  // teleop
  auto* teleop = app.add_subcommand("teleop", "Serve a teleoperation session over websockets");
  std::string t_spec, t_task = "place-red-in-green", t_session = "session", t_address = "127.0.0.1";
  std::uint16_t t_port = 8765;
  TeleopConfig t_config;
  double t_speedup = 1.0;
  teleop->add_option("--spec", t_spec, "Task spec file");
  teleop->add_option("--task", t_task, "Built-in task when no spec is given")->capture_default_str();
  teleop->add_option("--port", t_port, "Listening port")->capture_default_str();
  teleop->add_option("--address", t_address, "Listening address")->capture_default_str();
  teleop->add_option("--session", t_session, "Session directory")->capture_default_str();
  teleop->add_option("--pos-sensitivity", t_config.pos_sensitivity, "m per unit input")->capture_default_str();
  teleop->add_option("--rot-sensitivity", t_config.rot_sensitivity, "rad per unit input")->capture_default_str();
  teleop->add_option("--control-freq", t_config.control_freq, "Hz")->capture_default_str();
  teleop->add_option("--debounce-steps", t_config.debounce_steps, "Consecutive successes to save")
      ->capture_default_str();
  teleop->add_option("--max-step", t_config.max_step, "m per tick")->capture_default_str();
  teleop->add_option("--speedup", t_speedup, "Wall-clock speed multiplier")->capture_default_str();

  // taskspec
  auto* ts = app.add_subcommand("taskspec", "Task specification tools");
  ts->require_subcommand(1);
  std::string ts_file;
  bool ts_in_place = false;
  auto* lint = ts->add_subcommand("lint", "Parse and validate");
  lint->add_option("file", ts_file)->required();
  auto* fmt = ts->add_subcommand("fmt", "Print in canonical form");
  fmt->add_option("file", ts_file)->required();
  fmt->add_flag("-i,--in-place", ts_in_place, "Rewrite the file");
  auto* sample = ts->add_subcommand("sample", "Sample an initial scene");
  sample->add_option("file", ts_file)->required();
  double ts_clearance = kDefaultClearance;
  sample->add_option("--clearance", ts_clearance, "Minimum gap between footprints (m)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      GenConfig c;
      for (const auto& t : gen_tasks) c.tasks.push_back(parse_task(t));
      c.episodes = gen_n;
      c.seed = g.seed;
      c.camera = scaled_camera(render_scale);
      c.out = gen_out;
      c.workers = gen_workers;
      c.max_steps = gen_max_steps;
      if (!gen_spec.empty()) c.spec = load_spec(gen_spec);
      json out = json::array();
      std::string human;
      for (const auto& r : generate(c)) {
        json j = report_json(r.report);
        j["root"] = r.root.string();
        out.push_back(j);
        human += std::string(task_name(r.report.task_kind)) + ": " + std::to_string(r.report.successes) + "/" +
                 std::to_string(r.report.episodes) + " successful, written to " + r.root.string() + "\n";
      }
      emit(g, json{{"tasks", out}}, human);
    } else if (harness->parsed()) {
      HarnessOptions o;
      o.workers = h_workers;
      if (!h_spec.empty()) {
        if (h_tasks.size() != 1) throw Error("BAD_ARGUMENT", "--spec needs exactly one task");
        o.spec = load_spec(h_spec);
      }
      json out = json::array();
      std::string human;
      for (const auto& t : h_tasks) {
        const auto r = run_harness(parse_task(t), h_n, g.seed, o);
        out.push_back(report_json(r));
        char line[160];
        std::snprintf(line, sizeof line, "%-22s success %.2f  mean steps %.2f\n", std::string(task_name(r.task_kind)).c_str(),
                      r.success_rate, r.mean_steps);
        human += line;
      }
      emit(g, json{{"tasks", out}}, human);
    } else if (validate_cmd->parsed()) {
      const ValidationReport r = validate_inputs(as_paths(v_in));
      emit(g, r.to_json(),
           std::to_string(r.accepted) + " accepted, " + std::to_string(r.rejected) + " rejected of " +
               std::to_string(r.scanned) + "\n");
    } else if (aggregate->parsed()) {
      if (a_spec.empty() == a_task.empty()) throw Error("BAD_ARGUMENT", "give exactly one of --spec and --task");
      const TaskSpec spec = a_spec.empty() ? builtin_task_spec(parse_task(a_task)) : load_spec(a_spec);
      GatherConfig c;
      c.created_at = a_created.empty() ? utc_now() : a_created;
      c.control_freq = a_freq;
      const GatherResult r = gather(as_paths(a_in), spec, c, a_out);
      json j = r.report.to_json();
      j["demos"] = r.demos;
      j["total_steps"] = r.total_steps;
      j["out"] = a_out;
      emit(g, j, std::to_string(r.demos) + " demos, " + std::to_string(r.total_steps) + " steps -> " + a_out + "\n");
    } else if (inspect->parsed()) {
      const auto reader = ContainerReader::open(i_in);
      for (const auto& e : reader.entries())
        std::cout << json{{"path", e.path}, {"dtype", to_string(e.dtype)}, {"shape", e.shape},
                          {"offset", e.offset}, {"length", e.length}}
                         .dump()
                  << "\n";
    } else if (stats->parsed()) {
      const DatasetStats s = dataset_stats(ContainerReader::open(s_in));
      std::cout << s.to_json().dump() << "\n";
    } else if (normalize->parsed()) {
      const EmbodimentSpec emb = EmbodimentSpec::from_file(n_emb);
      const Array joints = read_array_file(n_traj[0]);
      if (joints.shape.size() != 2) throw Error("DIMENSION_MISMATCH", "joint trajectory must be (T, n)");
      const std::vector<double> flat = to_doubles(joints);
      const std::size_t T = joints.shape[0], n = joints.shape[1];
      std::vector<std::vector<double>> q(T);
      for (std::size_t t = 0; t < T; ++t) q[t].assign(flat.begin() + static_cast<std::ptrdiff_t>(t * n),
                                                      flat.begin() + static_cast<std::ptrdiff_t>((t + 1) * n));
      std::vector<double> grip(T, 0.0);
      if (n_traj.size() == 2) {
        const Array ga = read_array_file(n_traj[1]);
        if (ga.shape.size() != 1) throw Error("DIMENSION_MISMATCH", "gripper trajectory must be (T,)");
        grip = to_doubles(ga);
      }
      const auto actions = normalize_trajectory(emb, q, grip);
      std::vector<double> out;
      for (const auto& a : actions) out.insert(out.end(), a.begin(), a.end());
      write_array_file(n_out, make_f64(out, {static_cast<std::uint32_t>(actions.size()), 7}), false);
      emit(g, json{{"out", n_out}, {"steps", actions.size()}, {"embodiment", emb.name}},
           std::to_string(actions.size()) + " actions -> " + n_out + "\n");
    } else if (pipeline->parsed()) {
      std::optional<TaskSpec> spec;
      if (!p_spec.empty()) spec = load_spec(p_spec);
      if (p_task.empty() && !spec) throw Error("BAD_ARGUMENT", "give --task or --spec");
      const TaskKind kind = spec ? task_for(p_task, *spec) : parse_task(p_task);
      GatherConfig c;
      c.created_at = p_created.empty() ? utc_now() : p_created;
      const PipelineResult r =
          run_pipeline(kind, spec, p_n, g.seed, scaled_camera(render_scale), c, p_out, p_workers);
      json j = r.gathered.report.to_json();
      j["demos"] = r.gathered.demos;
      j["total_steps"] = r.gathered.total_steps;
      j["generation"] = report_json(r.generated.report);
      j["out"] = p_out;
      emit(g, j, std::to_string(r.gathered.demos) + " demos -> " + p_out + "\n");
    } else if (teleop->parsed()) {
#ifdef DEMOFORGE_HAVE_TELEOP
      const TaskSpec spec = t_spec.empty() ? builtin_task_spec(parse_task(t_task)) : load_spec(t_spec);
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      TeleopServer server(TeleopSession(spec, t_config, t_session, g.seed),
                          ServerOptions{t_address, t_port, t_speedup});
      server.start();
      std::cerr << "teleop: ws://" << t_address << ":" << server.port() << "/  session " << t_session << "\n";
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
#else
      throw Error("UNSUPPORTED", "built without the teleoperation server");
#endif
    } else if (ts->parsed()) {
      const std::string text = read_text(ts_file);
      const ParseResult r = parse_task_spec(text);
      std::vector<Diagnostic> diags = r.diagnostics;
      if (r.ok() && lint->parsed()) {
        const auto v = validate(*r.spec);
        diags.insert(diags.end(), v.begin(), v.end());
      }
      const bool failed = has_errors(diags);
      if (lint->parsed() || failed) {
        json arr = json::array();
        std::string human;
        for (const auto& d : diags) {
          arr.push_back({{"severity", d.severity == Severity::error ? "error" : "warning"},
                         {"code", d.code},
                         {"line", d.location.line},
                         {"column", d.location.column},
                         {"message", d.message}});
          human += format_diagnostic(d, ts_file) + "\n";
        }
        emit(g, json{{"file", ts_file}, {"ok", !failed}, {"diagnostics", arr}}, human);
        if (failed) return 1;
      } else if (fmt->parsed()) {
        const std::string canonical = render_task_spec(*r.spec);
        if (ts_in_place) {
          write_file_atomic(ts_file, std::span(reinterpret_cast<const std::uint8_t*>(canonical.data()), canonical.size()));
        } else {
          std::cout << canonical;
        }
      } else if (sample->parsed()) {
        const ScenePlacement s = sample_scene(*r.spec, g.seed, ts_clearance);
        json placements = json::array(), stacked = json::array();
        for (const auto& p : s.placements)
          placements.push_back({{"name", p.instance_name}, {"x", p.x}, {"y", p.y}, {"yaw", p.yaw}, {"region", p.region}});
        for (const auto& p : s.stacked)
          stacked.push_back({{"name", p.instance_name}, {"support", p.support}, {"relation", std::string(to_string(p.relation))}});
        std::cout << json{{"seed", s.seed}, {"placements", placements}, {"stacked", stacked}}.dump(g.json_output ? -1 : 2)
                  << "\n";
      }
    }
  } catch (const Error& e) {
    if (g.json_output) std::cout << json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
    std::cerr << "demoforge: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    if (g.json_output) std::cout << json{{"error", "INTERNAL"}, {"message", e.what()}}.dump() << "\n";
    std::cerr << "demoforge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

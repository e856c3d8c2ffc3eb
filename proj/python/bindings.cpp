#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "demoforge/aggregator.hpp"
#include "demoforge/error.hpp"
#include "demoforge/oracles.hpp"
#include "demoforge/pipeline.hpp"
#include "demoforge/recorder.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/simworld.hpp"
#include "demoforge/tasks.hpp"
#include "demoforge/taskspec.hpp"
#include "demoforge/teleop.hpp"
#include "demoforge/wire.hpp"
#include "demoforge/xembody.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace demoforge;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

TaskKind task_or_throw(const std::string& name) {
  const auto kind = task_from_string(name);
  if (!kind) throw Error("UNKNOWN_TASK", "no built-in task named '" + name + "'");
  return *kind;
}

CameraConfig camera_of(std::uint32_t width, std::uint32_t height) {
  CameraConfig c;
  c.width = width;
  c.height = height;
  c.check();
  return c;
}

py::array_t<std::uint8_t> rgb_array(const RgbImage& img) {
  py::array_t<std::uint8_t> out({py::ssize_t(img.height), py::ssize_t(img.width), py::ssize_t(3)});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

py::array_t<float> depth_array(const DepthImage& img) {
  py::array_t<float> out({py::ssize_t(img.height), py::ssize_t(img.width)});
  std::memcpy(out.mutable_data(), img.values.data(), img.values.size() * sizeof(float));
  return out;
}

py::dict observation_dict(const Observation& obs) {
  py::dict d;
  d["rgb"] = rgb_array(obs.rgb);
  d["depth"] = depth_array(obs.depth);
  py::dict poses;
  for (const auto& p : obs.object_poses) poses[py::str(p.name)] = py::make_tuple(p.x, p.y, p.yaw, p.z);
  d["object_poses"] = poses;
  d["instruction"] = obs.instruction;
  return d;
}

py::object array_to_py(const Array& a) {
  if (a.dtype == DType::utf8) return py::str(to_text(a));
  std::vector<py::ssize_t> shape(a.shape.begin(), a.shape.end());
  auto make = [&]<typename T>(T) -> py::object {
    py::array_t<T> out(shape);
    if (!a.data.empty()) std::memcpy(out.mutable_data(), a.data.data(), a.data.size());
    return out;
  };
  switch (a.dtype) {
    case DType::u8: return make(std::uint8_t{});
    case DType::f32: return make(float{});
    case DType::f64: return make(double{});
    case DType::i64: return make(std::int64_t{});
    case DType::utf8: break;
  }
  return py::none();
}

EmbodimentSpec embodiment(const std::vector<double>& links, const std::array<double, 3>& base) {
  EmbodimentSpec e{"python", links, {base[0], base[1], base[2]}};
  e.check();
  return e;
}

py::dict harness_dict(const HarnessReport& r) {
  py::dict d;
  d["task"] = std::string(task_name(r.task_kind));
  d["episodes"] = r.episodes;
  d["successes"] = r.successes;
  d["success_rate"] = r.success_rate;
  d["mean_steps"] = r.mean_steps;
  return d;
}

// Stateful simulator handle for scripted use from Python.
class Env {
 public:
  Env(const std::string& task, std::optional<std::string> spec_text, std::uint32_t width, std::uint32_t height)
      : kind_(task_or_throw(task)),
        spec_(spec_text ? parse_task_spec_or_throw(*spec_text) : builtin_task_spec(kind_)),
        camera_(camera_of(width, height)) {}

  py::dict reset(std::uint64_t seed) {
    auto r = demoforge::reset(spec_, seed, camera_);
    state_ = std::move(r.state);
    return observation_dict(r.observation);
  }

  py::tuple step(const std::array<double, 3>& pick, const std::array<double, 3>& place) {
    return apply(ActionPrimitive{{pick[0], pick[1], pick[2]}, {place[0], place[1], place[2]}});
  }

  py::tuple command(const std::array<double, 6>& delta, const std::string& grip) {
    return apply(GripperCommand{delta[0], delta[1], delta[2], delta[3], delta[4], delta[5], grip_from_string(grip)});
  }

  py::tuple oracle_action() {
    const ActionPrimitive a = Oracle(kind_, require()).act(observe(*state_));
    return py::make_tuple(py::make_tuple(a.pick_pose.x, a.pick_pose.y, a.pick_pose.yaw),
                          py::make_tuple(a.place_pose.x, a.place_pose.y, a.place_pose.yaw));
  }

  bool success() { return check_success(require()); }
  std::string spec_text() const { return render_task_spec(spec_); }

 private:
  const WorldState& require() {
    if (!state_) throw Error("NOT_RESET", "call reset() first");
    return *state_;
  }

  template <typename A>
  py::tuple apply(const A& action) {
    auto r = demoforge::step(require(), action);
    state_ = std::move(r.state);
    return py::make_tuple(observation_dict(r.observation), r.reward, r.done, r.effective);
  }

  TaskKind kind_;
  TaskSpec spec_;
  CameraConfig camera_;
  std::optional<WorldState> state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "demoforge native core";
  m.attr("__version__") = "0.1.0";

  static py::handle exc_type = py::exception<Error>(m, "DemoforgeError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = exc_type(e.what());
      inst.attr("code") = e.code();
      PyErr_SetObject(exc_type.ptr(), inst.ptr());
    }
  });

  m.def("task_names", [] {
    std::vector<std::string> names;
    for (TaskKind k : kAllTasks) names.emplace_back(task_name(k));
    return names;
  });
  m.def("builtin_spec", [](const std::string& task) { return std::string(builtin_task_text(task_or_throw(task))); });
  m.def("derive_episode_seed", &derive_episode_seed, py::arg("root"), py::arg("task_index"), py::arg("episode"));

  m.def(
      "lint_spec",
      [](const std::string& text) {
        ParseResult r = parse_task_spec(text);
        std::vector<Diagnostic> diags = r.diagnostics;
        if (r.spec) {
          const auto more = validate(*r.spec, ObjectRegistry::active());
          diags.insert(diags.end(), more.begin(), more.end());
        }
        py::list out;
        for (const auto& d : diags) {
          py::dict item;
          item["severity"] = d.severity == Severity::error ? "error" : "warning";
          item["code"] = d.code;
          item["line"] = d.location.line;
          item["column"] = d.location.column;
          item["message"] = d.message;
          out.append(item);
        }
        return out;
      },
      py::arg("text"));
  m.def("format_spec", [](const std::string& text) { return render_task_spec(parse_task_spec_or_throw(text)); },
        py::arg("text"));

  m.def(
      "harness",
      [](const std::string& task, std::size_t episodes, std::uint64_t seed, std::size_t workers) {
        HarnessOptions opt;
        opt.workers = workers;
        py::gil_scoped_release release;
        const HarnessReport r = run_harness(task_or_throw(task), episodes, seed, opt);
        py::gil_scoped_acquire acquire;
        return harness_dict(r);
      },
      py::arg("task"), py::arg("episodes") = 100, py::arg("seed") = 0, py::arg("workers") = 1);

  py::class_<Env>(m, "Env")
      .def(py::init<const std::string&, std::optional<std::string>, std::uint32_t, std::uint32_t>(), py::arg("task"),
           py::arg("spec") = py::none(), py::arg("width") = 160, py::arg("height") = 120)
      .def("reset", &Env::reset, py::arg("seed") = 0)
      .def("step", &Env::step, py::arg("pick"), py::arg("place"))
      .def("command", &Env::command, py::arg("delta"), py::arg("grip") = "hold")
      .def("oracle_action", &Env::oracle_action)
      .def("success", &Env::success)
      .def_property_readonly("spec", &Env::spec_text);

  m.def(
      "generate",
      [](const fs::path& out, const std::vector<std::string>& tasks, std::size_t episodes, std::uint64_t seed,
         std::uint32_t width, std::uint32_t height, std::size_t workers) {
        GenConfig g;
        for (const auto& t : tasks) g.tasks.push_back(task_or_throw(t));
        g.episodes = episodes;
        g.seed = seed;
        g.camera = camera_of(width, height);
        g.out = out;
        g.workers = workers;
        std::vector<TaskGenReport> reports;
        {
          py::gil_scoped_release release;
          reports = generate(g);
        }
        py::list result;
        for (const auto& r : reports) {
          py::dict d = harness_dict(r.report);
          d["root"] = r.root;
          result.append(d);
        }
        return result;
      },
      py::arg("out"), py::arg("tasks"), py::arg("episodes") = 1, py::arg("seed") = 0, py::arg("width") = 160,
      py::arg("height") = 120, py::arg("workers") = 1);

  m.def(
      "validate",
      [](const std::vector<fs::path>& inputs) { return to_py(validate_inputs(inputs).to_json()); },
      py::arg("inputs"));

  m.def(
      "aggregate",
      [](const std::vector<fs::path>& inputs, const fs::path& out, const std::string& task,
         const std::string& created_at, double control_freq, std::size_t workers) {
        GatherConfig gc{created_at, control_freq, workers};
        const TaskSpec spec = builtin_task_spec(task_or_throw(task));
        GatherResult r;
        {
          py::gil_scoped_release release;
          r = gather(inputs, spec, gc, out);
        }
        py::dict d;
        d["demos"] = r.demos;
        d["total_steps"] = r.total_steps;
        d["report"] = to_py(r.report.to_json());
        return d;
      },
      py::arg("inputs"), py::arg("out"), py::arg("task"), py::arg("created_at"), py::arg("control_freq") = 20.0,
      py::arg("workers") = 0);

  m.def(
      "read_container",
      [](const fs::path& path) {
        const ContainerReader reader = ContainerReader::open(path);
        py::dict d;
        for (const auto& e : reader.entries()) d[py::str(e.path)] = array_to_py(reader.read(e.path));
        return d;
      },
      py::arg("path"));
  m.def(
      "container_stats", [](const fs::path& path) { return to_py(dataset_stats(ContainerReader::open(path)).to_json()); },
      py::arg("path"));

  m.def(
      "forward_kinematics",
      [](const std::vector<double>& links, const std::vector<double>& joints, const std::array<double, 3>& base) {
        return forward_kinematics(embodiment(links, base), joints);
      },
      py::arg("links"), py::arg("joints"), py::arg("base") = std::array<double, 3>{0, 0, 0});
  m.def(
      "normalize_trajectory",
      [](const std::vector<double>& links, const std::vector<std::vector<double>>& joints,
         const std::vector<double>& gripper, const std::array<double, 3>& base) {
        const auto actions = normalize_trajectory(embodiment(links, base), joints, gripper);
        py::array_t<double> out({py::ssize_t(actions.size()), py::ssize_t(7)});
        if (!actions.empty()) std::memcpy(out.mutable_data(), actions.data(), actions.size() * 7 * sizeof(double));
        return out;
      },
      py::arg("links"), py::arg("joints"), py::arg("gripper"), py::arg("base") = std::array<double, 3>{0, 0, 0});
  m.def(
      "integrate_actions",
      [](const Pose6& start, const std::vector<UnifiedAction>& actions) { return integrate_actions(start, actions); },
      py::arg("start"), py::arg("actions"));
  m.def(
      "sample_mixture",
      [](const std::vector<std::pair<std::string, std::size_t>>& sources, const std::vector<double>& weights,
         std::size_t n, std::uint64_t seed) {
        std::vector<MixtureSource> src;
        for (const auto& [name, count] : sources) src.push_back({name, count});
        return sample_mixture(src, weights, n, seed);
      },
      py::arg("sources"), py::arg("weights"), py::arg("n"), py::arg("seed") = 0);

  m.def(
      "debounce",
      [](const std::vector<bool>& flags, std::uint32_t steps) {
        std::vector<std::string> phases;
        DebounceState s;
        for (bool f : flags) {
          s = advance_debounce(s, f, steps);
          phases.emplace_back(to_string(s.phase));
        }
        return phases;
      },
      py::arg("flags"), py::arg("debounce_steps") = 10);
  m.def(
      "parse_client_message",
      [](const std::string& text) -> py::object {
        const ClientMessage msg = parse_client_message(text);
        if (const auto* cmd = std::get_if<ControlCommand>(&msg)) {
          return to_py({{"type", "control"}, {"cmd", to_string(*cmd)}});
        }
        return to_py(nlohmann::json::parse(serialize_input(std::get<DeviceInput>(msg))));
      },
      py::arg("text"));
  m.def(
      "serialize_message",
      [](const py::object& msg) {
        const std::string canonical = from_py(msg).dump();
        const ClientMessage parsed = parse_client_message(canonical);
        if (const auto* cmd = std::get_if<ControlCommand>(&parsed)) return serialize_control(*cmd);
        return serialize_input(std::get<DeviceInput>(parsed));
      },
      py::arg("message"));
}

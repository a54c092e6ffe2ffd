// Python bindings. Structured values cross the boundary as JSON text; the
// pushdqn package wraps them into dicts.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pushdqn/checkpoint.h"
#include "pushdqn/explore.h"
#include "pushdqn/observe.h"
#include "pushdqn/session.h"
#include "pushdqn/trainer.h"

namespace py = pybind11;

namespace pushdqn {
namespace {

using nlohmann::json;

GeometryConfig ParseGeometry(const std::string& text) {
  GeometryConfig g;
  if (!text.empty()) json::parse(text).get_to(g);
  g.Validate();
  return g;
}

TrainConfig ParseTrainConfig(const std::string& text) {
  TrainConfig c;
  if (!text.empty()) json::parse(text).get_to(c);
  c.Validate();
  return c;
}

std::string MakeScene(std::uint64_t seed, int n_obstacles,
                      const std::string& geometry) {
  const GeometryConfig g = ParseGeometry(geometry);
  return SceneToJson(MakeScenario(seed, n_obstacles, g), g).dump();
}

py::tuple StepScene(const std::string& scene_text, int action) {
  const Scene s = SceneFromJson(json::parse(scene_text));
  const StepResult r = Step(s.world, Action(action), s.geometry);
  const double reward = RewardTotal(s.world, r.world, r.status, RewardWeights{},
                                    s.geometry.d_a);
  return py::make_tuple(SceneToJson(r.world, s.geometry).dump(), reward,
                        std::string(StatusName(r.status)));
}

py::array_t<std::uint8_t> RenderScene(const std::string& scene_text,
                                      int resolution) {
  const Scene s = SceneFromJson(json::parse(scene_text));
  const Observation obs = Render(s.world, s.geometry, resolution);
  py::array_t<std::uint8_t> out({obs.height, obs.width, 3});
  std::copy(obs.pixels.begin(), obs.pixels.end(), out.mutable_data());
  return out;
}

std::vector<double> SceneActionDistribution(const std::string& scene_text,
                                            const std::string& explore) {
  const Scene s = SceneFromJson(json::parse(scene_text));
  ExploreConfig cfg;
  if (!explore.empty()) json::parse(explore).get_to(cfg);
  const ActionDistribution d =
      ActionDistributionAt(BuildField(s.world, cfg), s.world.tool_pose);
  return {d.begin(), d.end()};
}

std::string Train(const std::string& config, const std::string& out_dir,
                  int stop_after) {
  const TrainConfig cfg = ParseTrainConfig(config);
  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(std::filesystem::path(out_dir) / "metrics.jsonl");
  std::ofstream episodes(std::filesystem::path(out_dir) / "episodes.jsonl");
  TrainerIo io;
  io.metrics = &metrics;
  io.episode_log = &episodes;
  io.checkpoint_dir = (std::filesystem::path(out_dir) / "checkpoints").string();
  io.stop_after = stop_after;
  Trainer trainer(cfg);
  TrainSummary s;
  {
    py::gil_scoped_release release;
    s = trainer.Run(io);
  }
  json evals = json::array();
  for (const auto& [k, m] : s.evaluations) {
    json e = m;
    e["episode"] = k;
    evals.push_back(std::move(e));
  }
  return json{{"first_episode", s.first_episode},
              {"last_episode", s.last_episode},
              {"total_grad_steps", s.total_grad_steps},
              {"evaluations", std::move(evals)}}
      .dump();
}

std::string EvaluateCheckpoint(const std::string& path, int n_scenes,
                               int n_obstacles, std::uint64_t seed,
                               const std::string& config) {
  TrainConfig cfg = ParseTrainConfig(config);
  const Checkpoint ck = ReadCheckpointFile(path, ConfigHash(cfg.geometry));
  cfg.resolution = ck.pair.primary.arch().in_height;
  const bool primary = ck.meta.run_config.value("exploit_with_primary", false);
  EvalMetrics m;
  {
    py::gil_scoped_release release;
    m = Evaluate(primary ? ck.pair.primary : ck.pair.target, n_scenes,
                 n_obstacles, cfg, seed);
  }
  return json(m).dump();
}

std::string CheckpointInfo(const std::string& path) {
  const Checkpoint ck = ReadCheckpointFile(path);
  return json{{"episode", ck.meta.episode},
              {"architecture", ck.pair.primary.arch()},
              {"parameters", ck.pair.primary.arch().ParameterCount()},
              {"adam_steps", ck.adam.step_count},
              {"run_config", ck.meta.run_config},
              {"warnings", ck.warnings}}
      .dump();
}

class PySessionManager {
 public:
  explicit PySessionManager(const std::string& geometry,
                            const std::string& default_checkpoint)
      : manager_([&] {
          SessionServiceConfig c;
          c.geometry = ParseGeometry(geometry);
          c.default_checkpoint = default_checkpoint;
          c.episode_log = &log_;
          return c;
        }()) {}

  std::string Handle(const std::string& text) {
    return manager_.HandleText(text, 1).dump();
  }
  // Finished episodes as JSONL, drained on each call.
  std::string TakeLog() {
    std::string out = log_.str();
    log_.str("");
    return out;
  }

 private:
  std::ostringstream log_;
  SessionManager manager_;
};

}  // namespace
}  // namespace pushdqn

PYBIND11_MODULE(_core, m) {
  using namespace pushdqn;
  m.doc() = "Native core of the pushdqn package";
  py::register_exception<CheckpointError>(m, "CheckpointError");
  py::register_exception<GenerationFailure>(m, "GenerationFailure");

  m.def("make_scene", &MakeScene, py::arg("seed"), py::arg("n_obstacles"),
        py::arg("geometry") = "");
  m.def("step_scene", &StepScene, py::arg("scene"), py::arg("action"));
  m.def("render_scene", &RenderScene, py::arg("scene"),
        py::arg("resolution") = 64);
  m.def("action_distribution", &SceneActionDistribution, py::arg("scene"),
        py::arg("explore") = "");
  m.def("train", &Train, py::arg("config"), py::arg("out_dir"),
        py::arg("stop_after") = 0);
  m.def("evaluate_checkpoint", &EvaluateCheckpoint, py::arg("path"),
        py::arg("n_scenes"), py::arg("n_obstacles"), py::arg("seed") = 0,
        py::arg("config") = "");
  m.def("checkpoint_info", &CheckpointInfo, py::arg("path"));
  m.def("parameter_count", [](int resolution) {
    return Architecture::Default(resolution).ParameterCount();
  });

  py::class_<PySessionManager>(m, "SessionManager")
      .def(py::init<const std::string&, const std::string&>(),
           py::arg("geometry") = "", py::arg("default_checkpoint") = "")
      .def("handle", &PySessionManager::Handle)
      .def("take_log", &PySessionManager::TakeLog);
}

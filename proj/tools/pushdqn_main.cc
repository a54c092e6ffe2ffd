// Command line front end: train, eval, serve, sample-debug, export-png.
//
// Every flag can also be set through an environment variable named
// PUSH_<FLAG> (e.g. PUSH_SEED, PUSH_PORT). Explicit flags win over the
// environment, which wins over the --config file, which wins over defaults.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11/CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pushdqn/checkpoint.h"
#include "pushdqn/explore.h"
#include "pushdqn/observe.h"
#include "pushdqn/server.h"
#include "pushdqn/trainer.h"

namespace {

using namespace pushdqn;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::optional<int> episodes;
  std::optional<int> obstacles;
  std::optional<int> resolution;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON configuration file")
      ->envname("PUSH_CONFIG");
  cmd->add_option("--seed", f.seed, "Run seed")->envname("PUSH_SEED");
  cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint file")
      ->envname("PUSH_CHECKPOINT");
  cmd->add_option("--episodes", f.episodes, "Episode or scene count")
      ->envname("PUSH_EPISODES");
  cmd->add_option("--obstacles", f.obstacles, "Number of obstacles")
      ->envname("PUSH_OBSTACLES");
  cmd->add_option("--resolution", f.resolution, "Observation size: 32, 64, 128")
      ->envname("PUSH_RESOLUTION");
}

TrainConfig LoadConfig(const CommonFlags& f) {
  TrainConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw std::runtime_error("cannot open config " + f.config_path);
    cfg = nlohmann::json::parse(in).get<TrainConfig>();
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.obstacles) cfg.n_obstacles = *f.obstacles;
  if (f.resolution) cfg.resolution = *f.resolution;
  return cfg;
}

int RunTrain(const CommonFlags& f, const std::string& out_dir, int stop_after) {
  TrainConfig cfg = LoadConfig(f);
  if (f.episodes) cfg.total_episodes = *f.episodes;
  Trainer trainer(cfg);
  if (!f.checkpoint.empty()) {
    const std::string replay =
        std::filesystem::path(f.checkpoint).replace_extension(".replay").string();
    for (const std::string& w : trainer.Resume(f.checkpoint, replay)) {
      std::cerr << "warning: " << w << "\n";
    }
    std::cerr << "resumed at episode " << trainer.episode() << "\n";
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(std::filesystem::path(out_dir) / "metrics.jsonl",
                        std::ios::app);
  std::ofstream episodes(std::filesystem::path(out_dir) / "episodes.jsonl",
                         std::ios::app);
  {
    std::ofstream cfg_out(std::filesystem::path(out_dir) / "config.json");
    cfg_out << nlohmann::json(trainer.config()).dump(2) << "\n";
  }
  TrainerIo io;
  io.metrics = &metrics;
  io.episode_log = &episodes;
  io.checkpoint_dir = (std::filesystem::path(out_dir) / "checkpoints").string();
  io.stop_after = stop_after;
  io.on_eval = [](int episode, const EvalMetrics& m) {
    std::cerr << "episode " << episode << ": success " << m.success_rate
              << " mean actions " << m.mean_actions_on_success << "\n";
  };
  const TrainSummary s = trainer.Run(io);
  std::cerr << "trained episodes " << s.first_episode << ".." << s.last_episode
            << ", gradient steps " << s.total_grad_steps << "\n";
  return 0;
}

int RunEval(const CommonFlags& f) {
  if (f.checkpoint.empty()) throw std::runtime_error("eval needs --checkpoint");
  TrainConfig cfg = LoadConfig(f);
  Checkpoint ck = ReadCheckpointFile(f.checkpoint, ConfigHash(cfg.geometry));
  for (const std::string& w : ck.warnings) std::cerr << "warning: " << w << "\n";
  cfg.resolution = ck.pair.primary.arch().in_height;
  const bool primary = cfg.exploit_with_primary;
  const int scenes = f.episodes.value_or(cfg.eval_scenes);
  const EvalMetrics m =
      Evaluate(primary ? ck.pair.primary : ck.pair.target, scenes,
               cfg.n_obstacles, cfg, cfg.seed);
  nlohmann::json out = m;
  out["checkpoint_episode"] = ck.meta.episode;
  std::cout << out.dump() << "\n";
  return 0;
}

int RunSampleDebug(const CommonFlags& f, int draws) {
  const TrainConfig cfg = LoadConfig(f);
  const WorldState w =
      MakeScenario(cfg.seed, cfg.n_obstacles, cfg.geometry);
  const PotentialField field = BuildField(w, cfg.explore);
  const ActionDistribution dist = ActionDistributionAt(field, w.tool_pose);
  std::array<int, kNumActions> counts{};
  Rng rng(MixSeed(cfg.seed, 1));
  for (int i = 0; i < draws; ++i) ++counts[SampleAction(dist, rng).slot()];

  nlohmann::json out;
  out["tool"] = w.tool_pose;
  out["object"] = w.object_pose;
  out["target"] = w.target_pose;
  out["obstacles"] = w.obstacles;
  out["potential"] = Potential(field, w.tool_pose);
  out["gradient"] = PotentialGradient(field, w.tool_pose);
  for (int a = 1; a <= kNumActions; ++a) {
    out["actions"].push_back(
        {{"action", a},
         {"delta", SectorDelta(field, w.tool_pose, Action(a))},
         {"probability", dist[a - 1]},
         {"empirical", draws > 0 ? static_cast<double>(counts[a - 1]) / draws
                                 : 0.0}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int RunExportPng(const CommonFlags& f, const std::string& out_path,
                 int steps) {
  const TrainConfig cfg = LoadConfig(f);
  WorldState w = MakeScenario(cfg.seed, cfg.n_obstacles, cfg.geometry);
  if (steps <= 0) {
    WritePng(Render(w, cfg.geometry, cfg.resolution), out_path);
    std::cerr << "wrote " << out_path << "\n";
    return 0;
  }
  // Greedy rollout frames: <stem>_000.png, <stem>_001.png, ...
  if (f.checkpoint.empty()) {
    throw std::runtime_error("export-png --steps needs --checkpoint");
  }
  Checkpoint ck = ReadCheckpointFile(f.checkpoint, ConfigHash(cfg.geometry));
  const QNetwork<float>& net =
      cfg.exploit_with_primary ? ck.pair.primary : ck.pair.target;
  const int res = net.arch().in_height;
  const std::filesystem::path base(out_path);
  auto frame_path = [&](int i) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%03d", i);
    return (base.parent_path() /
            (base.stem().string() + suffix + base.extension().string()))
        .string();
  };
  WritePng(Render(w, cfg.geometry, res), frame_path(0));
  Status status = Termination(w, cfg.geometry);
  int i = 0;
  while (i < steps && !IsTerminal(status)) {
    StepResult r = Step(w, GreedyAction(net, w, cfg.geometry, res), cfg.geometry);
    w = std::move(r.world);
    status = r.status;
    WritePng(Render(w, cfg.geometry, res), frame_path(++i));
  }
  std::cerr << "wrote " << i + 1 << " frames, status " << StatusName(status)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning for planar pushing"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, serve_flags, debug_flags, png_flags;
  std::string out_dir = "runs/latest";
  int stop_after = 0;
  auto* train = app.add_subcommand("train", "Train a Q-network");
  AddCommon(train, train_flags);
  train->add_option("--out", out_dir, "Output directory")->envname("PUSH_OUT");
  train->add_option("--stop-after", stop_after,
                    "Stop after this episode (schedule still uses --episodes)")
      ->envname("PUSH_STOP_AFTER");

  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  AddCommon(eval, eval_flags);

  ServerOptions server_opts;
  auto* serve = app.add_subcommand("serve", "Session service and UI host");
  AddCommon(serve, serve_flags);
  serve->add_option("--port", server_opts.port, "TCP port")
      ->envname("PUSH_PORT");
  serve->add_option("--host", server_opts.host, "Bind address")
      ->envname("PUSH_HOST");
  serve->add_option("--static", server_opts.static_dir,
                    "Directory of UI assets served over HTTP")
      ->envname("PUSH_STATIC");
  serve->add_option("--log", server_opts.episode_log,
                    "JSONL log for finished session episodes")
      ->envname("PUSH_LOG");

  int draws = 100000;
  auto* debug = app.add_subcommand(
      "sample-debug", "Show the exploration distribution for a scenario");
  AddCommon(debug, debug_flags);
  debug->add_option("--draws", draws, "Number of sampled actions");

  std::string png_out = "scene.png";
  int png_steps = 0;
  auto* png = app.add_subcommand("export-png", "Render a scenario to PNG");
  AddCommon(png, png_flags);
  png->add_option("--out", png_out, "Output file");
  png->add_option("--steps", png_steps,
                  "Also export greedy rollout frames (needs --checkpoint)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return RunTrain(train_flags, out_dir, stop_after);
    if (eval->parsed()) return RunEval(eval_flags);
    if (debug->parsed()) return RunSampleDebug(debug_flags, draws);
    if (png->parsed()) return RunExportPng(png_flags, png_out, png_steps);
    if (serve->parsed()) {
      const TrainConfig cfg = LoadConfig(serve_flags);
      server_opts.geometry = cfg.geometry;
      server_opts.weights = cfg.weights;
      server_opts.default_checkpoint = serve_flags.checkpoint;
      return RunServer(server_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "pushdqn/trainer.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "pushdqn/observe.h"

namespace pushdqn {

namespace {

constexpr std::uint64_t kTrainSceneSalt = 0x7472'6169'6e00ULL;
constexpr std::uint64_t kEvalSceneSalt = 0x6576'616c'0000ULL;
constexpr std::uint64_t kInitSalt = 0x696e'6974ULL;
constexpr std::uint64_t kLoopSalt = 0x6c6f'6f70ULL;

std::string_view ExplorationName(ExplorationMode m) {
  return m == ExplorationMode::kUniform ? "uniform" : "informed";
}

ExplorationMode ExplorationFromName(const std::string& s) {
  if (s == "informed") return ExplorationMode::kInformed;
  if (s == "uniform") return ExplorationMode::kUniform;
  throw std::invalid_argument("unknown exploration mode: " + s);
}

}  // namespace

void TrainConfig::Validate() const {
  geometry.Validate();
  buffer_policy.Validate();
  if (!(k1 >= 0 && k1 < k2 && k2 <= total_episodes)) {
    throw std::invalid_argument("TrainConfig: need 0 <= k1 < k2 <= total_episodes");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("TrainConfig: gamma must be in [0, 1]");
  }
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
  if (n_obstacles < 0) throw std::invalid_argument("TrainConfig: n_obstacles < 0");
  if (!SupportedResolution(resolution)) {
    throw std::invalid_argument("TrainConfig: resolution must be 32, 64 or 128");
  }
  if (replay_capacity == 0) {
    throw std::invalid_argument("TrainConfig: replay_capacity must be positive");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  }
  if (eval_every < 1 || eval_scenes < 1) {
    throw std::invalid_argument("TrainConfig: eval_every and eval_scenes >= 1");
  }
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("TrainConfig: clip_norm must be positive");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"k1", c.k1},
       {"k2", c.k2},
       {"total_episodes", c.total_episodes},
       {"gamma", c.gamma},
       {"batch_size", c.batch_size},
       {"n_obstacles", c.n_obstacles},
       {"resolution", c.resolution},
       {"geometry", c.geometry},
       {"weights", c.weights},
       {"buffer_policy", c.buffer_policy},
       {"explore", c.explore},
       {"exploration", ExplorationName(c.exploration)},
       {"replay_capacity", c.replay_capacity},
       {"learning_rate", c.learning_rate},
       {"eval_every", c.eval_every},
       {"eval_scenes", c.eval_scenes},
       {"seed", c.seed},
       {"exploit_with_primary", c.exploit_with_primary},
       {"clip_gradients", c.clip_gradients},
       {"clip_norm", c.clip_norm}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("k1", c.k1);
  get("k2", c.k2);
  get("total_episodes", c.total_episodes);
  get("gamma", c.gamma);
  get("batch_size", c.batch_size);
  get("n_obstacles", c.n_obstacles);
  get("resolution", c.resolution);
  get("geometry", c.geometry);
  get("weights", c.weights);
  get("buffer_policy", c.buffer_policy);
  get("explore", c.explore);
  if (j.contains("exploration")) {
    c.exploration = ExplorationFromName(j.at("exploration").get<std::string>());
  }
  get("replay_capacity", c.replay_capacity);
  get("learning_rate", c.learning_rate);
  get("eval_every", c.eval_every);
  get("eval_scenes", c.eval_scenes);
  get("seed", c.seed);
  get("exploit_with_primary", c.exploit_with_primary);
  get("clip_gradients", c.clip_gradients);
  get("clip_norm", c.clip_norm);
}

double ExploitProbability(int k, const TrainConfig& cfg) {
  if (k < 1) throw std::invalid_argument("ExploitProbability: k must be >= 1");
  if (k <= cfg.k1) return 0.0;
  if (k > cfg.k2) return 1.0;
  return static_cast<double>(k - cfg.k1) / static_cast<double>(cfg.k2 - cfg.k1);
}

std::uint64_t EvalSceneSeed(std::uint64_t run_seed, int i) {
  return MixSeed(MixSeed(run_seed, kEvalSceneSalt), static_cast<std::uint64_t>(i));
}

std::uint64_t TrainSceneSeed(std::uint64_t run_seed, int episode) {
  return MixSeed(MixSeed(run_seed, kTrainSceneSalt),
                 static_cast<std::uint64_t>(episode));
}

namespace {

Action ArgmaxAction(const QNetwork<float>& net, const Observation& obs) {
  Tensor<float> input({1, 3, obs.height, obs.width});
  NormalizeInto(obs, input.data());
  const Tensor<float> q = net.Forward(input);
  return Action(ArgmaxRow(q, 0) + 1);
}

}  // namespace

Action GreedyAction(const QNetwork<float>& net, const WorldState& world,
                    const GeometryConfig& geometry, int resolution) {
  return ArgmaxAction(net, Render(world, geometry, resolution));
}

EpisodeResult RunEpisodeFrom(WorldState world, const RolloutOptions& opts,
                             const TrainConfig& cfg, Rng& rng) {
  if (opts.p_exploit > 0.0 && opts.greedy == nullptr) {
    throw std::invalid_argument("RunEpisode: exploitation needs a network");
  }
  const GeometryConfig& geo = cfg.geometry;
  const bool need_obs = opts.collect_experiences || opts.p_exploit > 0.0;

  EpisodeResult res;
  res.record.seed = opts.scenario_seed;
  res.record.n_obstacles = static_cast<int>(world.obstacles.size());
  Observation obs;
  if (need_obs) obs = Render(world, geo, cfg.resolution);

  Status status = Termination(world, geo);
  while (!IsTerminal(status)) {
    const bool exploit = rng.Uniform() < opts.p_exploit;
    Action a(1);
    if (exploit) {
      a = ArgmaxAction(*opts.greedy, obs);
    } else if (opts.exploration == ExplorationMode::kInformed) {
      a = SampleAction(BuildField(world, cfg.explore), world.tool_pose, rng);
    } else {
      a = SampleUniformAction(rng);
    }
    StepResult next = Step(world, a, geo);
    const double r =
        RewardTotal(world, next.world, next.status, cfg.weights, geo.d_a);
    Observation next_obs;
    if (need_obs) next_obs = Render(next.world, geo, cfg.resolution);
    if (opts.collect_experiences) {
      res.experiences.push_back(
          {obs, a, r, next_obs, IsTerminal(next.status), false});
    }
    res.record.actions.push_back(a.index());
    res.record.rewards.push_back(r);
    world = std::move(next.world);
    obs = std::move(next_obs);
    status = next.status;
  }
  res.record.outcome = status;
  const bool success = status == Status::kSuccess;
  for (Experience& e : res.experiences) e.episode_success = success;
  res.final_world = std::move(world);
  return res;
}

EpisodeResult RunEpisode(const RolloutOptions& opts, const TrainConfig& cfg,
                         Rng& rng) {
  return RunEpisodeFrom(
      MakeScenario(opts.scenario_seed, opts.n_obstacles, cfg.geometry), opts,
      cfg, rng);
}

void to_json(nlohmann::json& j, const EvalMetrics& m) {
  nlohmann::json hist = nlohmann::json::object();
  for (int s = 0; s < 5; ++s) {
    hist[std::string(StatusName(static_cast<Status>(s)))] = m.histogram[s];
  }
  j = {{"n_scenes", m.n_scenes},
       {"n_obstacles", m.n_obstacles},
       {"success_rate", m.success_rate},
       {"mean_actions", m.mean_actions_on_success},
       {"histogram", hist}};
}

EvalMetrics Evaluate(const QNetwork<float>& net, int n_scenes, int n_obstacles,
                     const TrainConfig& cfg, std::uint64_t eval_seed) {
  if (n_scenes < 1) throw std::invalid_argument("Evaluate: n_scenes must be >= 1");
  EvalMetrics m;
  m.n_scenes = n_scenes;
  m.n_obstacles = n_obstacles;
  long success_steps = 0;
  for (int i = 0; i < n_scenes; ++i) {
    RolloutOptions opts;
    opts.scenario_seed = EvalSceneSeed(eval_seed, i);
    opts.n_obstacles = n_obstacles;
    opts.p_exploit = 1.0;
    opts.greedy = &net;
    opts.collect_experiences = false;
    // Greedy rollouts never consult the coin's outcome.
    Rng unused(0);
    const EpisodeResult r = RunEpisode(opts, cfg, unused);
    ++m.histogram[static_cast<int>(r.record.outcome)];
    if (r.record.outcome == Status::kSuccess) success_steps += r.record.length();
  }
  const int successes = m.Count(Status::kSuccess);
  m.success_rate = static_cast<double>(successes) / n_scenes;
  m.mean_actions_on_success =
      successes > 0 ? static_cast<double>(success_steps) / successes : 0.0;
  return m;
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_((cfg.Validate(), std::move(cfg))),
      pair_(Architecture::Default(cfg_.resolution)),
      buffer_(cfg_.replay_capacity),
      rng_(MixSeed(cfg_.seed, kLoopSalt)) {
  Rng init(MixSeed(cfg_.seed, kInitSalt));
  pair_.primary.InitializeUniform(init);
  pair_.HardSync();
  adam_ = AdamState<float>::For(pair_.primary.params());
  adam_.learning_rate = cfg_.learning_rate;
}

const QNetwork<float>& Trainer::GreedyNetwork() const {
  return cfg_.exploit_with_primary ? pair_.primary : pair_.target;
}

nlohmann::json Trainer::TrainEpisode(std::ostream* episode_log) {
  const int k = episode_ + 1;
  RolloutOptions opts;
  opts.scenario_seed = TrainSceneSeed(cfg_.seed, k);
  opts.n_obstacles = cfg_.n_obstacles;
  opts.p_exploit = ExploitProbability(k, cfg_);
  opts.greedy = &GreedyNetwork();
  opts.exploration = cfg_.exploration;
  EpisodeResult res = RunEpisode(opts, cfg_, rng_);

  buffer_.PushEpisode(res.experiences, cfg_.buffer_policy, rng_);
  res.experiences.clear();
  const double ratio = buffer_.SuccessRatio();
  int steps = 0;
  if (buffer_.size() >= cfg_.buffer_policy.min_fill &&
      buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
    steps = UpdateCount(ratio, cfg_.buffer_policy, rng_);
  }
  double loss_sum = 0.0;
  for (int i = 0; i < steps; ++i) {
    const std::vector<Experience> batch =
        buffer_.SampleBatch(static_cast<std::size_t>(cfg_.batch_size), rng_);
    LossAndGrads<float> lg = DqnLossAndGrads(
        pair_, std::span<const Experience>(batch), cfg_.gamma);
    if (cfg_.clip_gradients) ClipGlobalNorm(lg.grads, cfg_.clip_norm);
    AdamStep(pair_.primary.params(), lg.grads, adam_);
    SoftUpdate(pair_);
    loss_sum += lg.loss;
  }
  episode_ = k;

  if (episode_log != nullptr) {
    res.record.mode = "train";
    res.record.episode = k;
    *episode_log << nlohmann::json(res.record).dump() << '\n';
  }
  nlohmann::json line = {{"type", "episode"},
                         {"episode", k},
                         {"outcome", StatusName(res.record.outcome)},
                         {"length", res.record.length()},
                         {"return", res.record.Return()},
                         {"buffer_ratio", ratio},
                         {"buffer_size", buffer_.size()},
                         {"p_exploit", opts.p_exploit},
                         {"grad_steps", steps},
                         {"loss_mean", nullptr}};
  if (steps > 0) line["loss_mean"] = loss_sum / steps;
  return line;
}

TrainSummary Trainer::Run(const TrainerIo& io) {
  TrainSummary summary;
  summary.first_episode = episode_ + 1;
  const int last = std::min(cfg_.total_episodes, io.stop_after > 0
                                                     ? io.stop_after
                                                     : cfg_.total_episodes);
  if (!io.checkpoint_dir.empty()) {
    std::filesystem::create_directories(io.checkpoint_dir);
  }
  while (episode_ < last) {
    const nlohmann::json line = TrainEpisode(io.episode_log);
    summary.total_grad_steps += line["grad_steps"].get<int>();
    if (io.metrics != nullptr) *io.metrics << line.dump() << '\n';

    const bool scheduled = episode_ % cfg_.eval_every == 0 || episode_ == last;
    const bool extra =
        std::find(io.extra_eval_episodes.begin(), io.extra_eval_episodes.end(),
                  episode_) != io.extra_eval_episodes.end();
    if (scheduled || extra) {
      const EvalMetrics m = Evaluate(GreedyNetwork(), cfg_.eval_scenes,
                                     cfg_.n_obstacles, cfg_, cfg_.seed);
      summary.evaluations.emplace_back(episode_, m);
      if (io.metrics != nullptr) {
        nlohmann::json e = m;
        e["type"] = "eval";
        e["episode"] = episode_;
        *io.metrics << e.dump() << '\n';
        io.metrics->flush();
      }
      if (io.on_eval) io.on_eval(episode_, m);
    }
    if (scheduled && !io.checkpoint_dir.empty()) {
      const std::filesystem::path dir(io.checkpoint_dir);
      SaveCheckpoint(
          (dir / ("ckpt_" + std::to_string(episode_) + ".bin")).string());
      SaveCheckpoint((dir / "latest.bin").string());
      SaveReplay((dir / "latest.replay").string());
    }
  }
  summary.last_episode = episode_;
  return summary;
}

CheckpointMeta Trainer::Meta() const {
  CheckpointMeta meta;
  meta.episode = episode_;
  meta.config_hash = ConfigHash(cfg_.geometry);
  meta.rng_state = rng_.State();
  meta.run_config = cfg_;
  return meta;
}

void Trainer::SaveCheckpoint(const std::string& path) const {
  WriteCheckpointFile(path, pair_, adam_, Meta());
}

void Trainer::SaveReplay(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    buffer_.Save(out);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> Trainer::Resume(const std::string& checkpoint_path,
                                         const std::string& replay_path) {
  Checkpoint ck = ReadCheckpointFile(checkpoint_path, ConfigHash(cfg_.geometry));
  if (!(ck.pair.primary.arch() == pair_.primary.arch())) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          "checkpoint architecture " +
                              ck.pair.primary.arch().Id() +
                              " does not match the configured " +
                              pair_.primary.arch().Id());
  }
  std::vector<std::string> warnings = std::move(ck.warnings);
  pair_ = std::move(ck.pair);
  adam_ = std::move(ck.adam);
  rng_.SetState(ck.meta.rng_state);
  episode_ = static_cast<int>(ck.meta.episode);
  if (!replay_path.empty() && std::filesystem::exists(replay_path)) {
    std::ifstream in(replay_path, std::ios::binary);
    buffer_.Load(in);
  } else {
    buffer_ = ReplayBuffer(cfg_.replay_capacity);
    warnings.push_back("no replay snapshot found; replay buffer starts empty");
  }
  return warnings;
}

}  // namespace pushdqn

#ifndef PUSHDQN_TRAINER_H_
#define PUSHDQN_TRAINER_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/checkpoint.h"
#include "pushdqn/dqn.h"
#include "pushdqn/env.h"
#include "pushdqn/episode.h"
#include "pushdqn/explore.h"
#include "pushdqn/replay.h"
#include "pushdqn/reward.h"

namespace pushdqn {

enum class ExplorationMode { kInformed, kUniform };

struct TrainConfig {
  int k1 = 200;
  int k2 = 5000;
  int total_episodes = 10000;
  double gamma = 0.99;
  int batch_size = 32;
  int n_obstacles = 2;
  int resolution = 64;
  GeometryConfig geometry;
  RewardWeights weights;
  BufferPolicy buffer_policy;
  ExploreConfig explore;
  ExplorationMode exploration = ExplorationMode::kInformed;
  std::size_t replay_capacity = 200000;
  double learning_rate = 1e-4;
  int eval_every = 1000;
  int eval_scenes = 300;
  std::uint64_t seed = 0;
  // Greedy actions come from the target network unless this is set.
  bool exploit_with_primary = false;
  // Global-norm gradient clipping at clip_norm.
  bool clip_gradients = false;
  double clip_norm = 10.0;

  void Validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c);

// 0 up to k1, linear ramp to 1 at k2, 1 afterwards. k is 1-based.
double ExploitProbability(int k, const TrainConfig& cfg);

struct EpisodeResult {
  EpisodeRecord record;
  std::vector<Experience> experiences;  // empty unless requested
  WorldState final_world;
};

struct RolloutOptions {
  std::uint64_t scenario_seed = 0;
  int n_obstacles = 0;
  double p_exploit = 0.0;
  // Network queried for greedy actions; may be null when p_exploit is 0.
  const QNetwork<float>* greedy = nullptr;
  ExplorationMode exploration = ExplorationMode::kInformed;
  bool collect_experiences = true;
};

// One episode from a fresh scenario. Each step draws one uniform for the
// exploit coin, then either takes the argmax Q action or samples from the
// exploration distribution at the tool position.
EpisodeResult RunEpisode(const RolloutOptions& opts, const TrainConfig& cfg,
                         Rng& rng);
// Same, starting from a given world.
EpisodeResult RunEpisodeFrom(WorldState world, const RolloutOptions& opts,
                             const TrainConfig& cfg, Rng& rng);

// Greedy action for a world under the given network.
Action GreedyAction(const QNetwork<float>& net, const WorldState& world,
                    const GeometryConfig& geometry, int resolution);

struct EvalMetrics {
  int n_scenes = 0;
  int n_obstacles = 0;
  double success_rate = 0.0;
  // Mean length of successful episodes; 0 when there were none.
  double mean_actions_on_success = 0.0;
  std::array<int, 5> histogram{};  // indexed by Status

  int Count(Status s) const { return histogram[static_cast<int>(s)]; }
};

void to_json(nlohmann::json& j, const EvalMetrics& m);

// Pure-greedy rollouts on scenes derived from eval_seed.
EvalMetrics Evaluate(const QNetwork<float>& net, int n_scenes, int n_obstacles,
                     const TrainConfig& cfg, std::uint64_t eval_seed);

// Scene seed i of the held-out evaluation set for a run seed.
std::uint64_t EvalSceneSeed(std::uint64_t run_seed, int i);
std::uint64_t TrainSceneSeed(std::uint64_t run_seed, int episode);

struct TrainerIo {
  std::ostream* metrics = nullptr;      // JSONL, one line per episode/eval
  std::ostream* episode_log = nullptr;  // JSONL episode records
  // Checkpoints go to <dir>/ckpt_<episode>.bin and <dir>/latest.bin, with a
  // replay snapshot next to the latter. Empty disables checkpointing.
  std::string checkpoint_dir;
  // Extra evaluation points besides every eval_every episodes.
  std::vector<int> extra_eval_episodes;
  // Stop after this episode instead of cfg.total_episodes (0 = run all).
  // The exploitation schedule still follows the configured totals.
  int stop_after = 0;
  // Called after each evaluation.
  std::function<void(int episode, const EvalMetrics&)> on_eval;
};

struct TrainSummary {
  int first_episode = 1;
  int last_episode = 0;
  std::vector<std::pair<int, EvalMetrics>> evaluations;
  long total_grad_steps = 0;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  // Restores networks, optimizer, rng and episode counter from a checkpoint
  // file; the replay snapshot is restored when `replay_path` exists.
  // Returns warnings.
  std::vector<std::string> Resume(const std::string& checkpoint_path,
                                  const std::string& replay_path);

  // Runs episodes up to cfg.total_episodes or io.stop_after.
  TrainSummary Run(const TrainerIo& io);

  // Runs a single episode with its buffer and network updates. Returns the
  // metrics record for that episode.
  nlohmann::json TrainEpisode(std::ostream* episode_log = nullptr);

  const TrainConfig& config() const { return cfg_; }
  const NetworkPair<float>& pair() const { return pair_; }
  const AdamState<float>& adam() const { return adam_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const QNetwork<float>& GreedyNetwork() const;
  int episode() const { return episode_; }
  const Rng& rng() const { return rng_; }

  CheckpointMeta Meta() const;
  void SaveCheckpoint(const std::string& path) const;
  void SaveReplay(const std::string& path) const;

 private:
  TrainConfig cfg_;
  NetworkPair<float> pair_;
  AdamState<float> adam_;
  ReplayBuffer buffer_;
  Rng rng_;
  int episode_ = 0;  // last completed episode
};

}  // namespace pushdqn

#endif  // PUSHDQN_TRAINER_H_

#ifndef PUSHDQN_REPLAY_H_
#define PUSHDQN_REPLAY_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/env.h"
#include "pushdqn/observe.h"
#include "pushdqn/rng.h"

namespace pushdqn {

struct Experience {
  Observation obs;
  Action action{1};
  double reward = 0.0;
  Observation next_obs;
  bool terminal = false;
  bool episode_success = false;
};

struct BufferPolicy {
  double low_ratio = 0.3;
  double high_ratio = 0.7;
  double p_store_favored = 1.0;
  double p_store_disfavored = 0.3;
  double eps1 = 0.4;
  double eps2 = 0.1;
  double p_rare_update = 0.1;
  int n_multi_update = 4;
  std::size_t min_fill = 2000;
  // When false every experience is stored (plain FIFO replay).
  bool control_storage = true;

  void Validate() const;
  bool operator==(const BufferPolicy&) const = default;
};

void to_json(nlohmann::json& j, const BufferPolicy& p);
void from_json(const nlohmann::json& j, BufferPolicy& p);

// Lossless deflate-compressed frame. Consecutive transitions of an episode
// share the frame between next_obs and the following obs.
class PackedFrame {
 public:
  explicit PackedFrame(const Observation& obs);
  PackedFrame(int width, int height, std::vector<std::uint8_t> compressed)
      : width_(width), height_(height), bytes_(std::move(compressed)) {}
  Observation Unpack() const;
  std::size_t compressed_bytes() const { return bytes_.size(); }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& compressed() const { return bytes_; }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bytes_;
};

// FIFO experience store with success-ratio controlled admission.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 200000);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  std::size_t success_count() const { return success_count_; }

  // success_count / size, 0 for an empty buffer.
  double SuccessRatio() const;

  // Admits an episode's experiences. The ratio is read once before the
  // first draw; every experience then gets an independent Bernoulli trial
  // with the regime's storage probability. Returns the number stored.
  std::size_t PushEpisode(const std::vector<Experience>& episode,
                          const BufferPolicy& policy, Rng& rng);

  // Unconditional append with FIFO eviction.
  void Push(const Experience& e);

  // n uniform draws with replacement. Throws std::invalid_argument when the
  // buffer holds fewer than n entries.
  std::vector<Experience> SampleBatch(std::size_t n, Rng& rng) const;

  Experience At(std::size_t i) const;
  // Recomputes the success count from scratch.
  std::size_t RecountSuccesses() const;
  std::size_t StoredBytes() const;

  // Binary snapshot of the entire contents (host byte order), used to
  // resume training exactly. Load replaces the current contents.
  void Save(std::ostream& out) const;
  void Load(std::istream& in);

 private:
  struct Entry {
    std::shared_ptr<const PackedFrame> obs;
    std::shared_ptr<const PackedFrame> next_obs;
    int action;
    double reward;
    bool terminal;
    bool episode_success;
  };

  void Append(Entry entry);
  Experience Expand(const Entry& e) const;

  std::size_t capacity_;
  std::deque<Entry> entries_;
  std::size_t success_count_ = 0;
};

// Storage probability for an episode given the current buffer ratio.
double StoreProbability(double ratio, bool episode_success,
                        const BufferPolicy& policy);

// Number of gradient steps to take after an episode.
int UpdateCount(double ratio, const BufferPolicy& policy, Rng& rng);

}  // namespace pushdqn

#endif  // PUSHDQN_REPLAY_H_

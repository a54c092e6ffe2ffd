#include "pushdqn/replay.h"

#include <zlib.h>

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

namespace pushdqn {

void BufferPolicy::Validate() const {
  auto prob = [](double p) { return p > 0.0 && p <= 1.0; };
  if (!(0.0 < low_ratio && low_ratio < high_ratio && high_ratio < 1.0)) {
    throw std::invalid_argument("BufferPolicy: need 0 < low < high < 1");
  }
  if (!prob(p_store_favored) || !prob(p_store_disfavored) ||
      !prob(p_rare_update)) {
    throw std::invalid_argument("BufferPolicy: probabilities must be in (0,1]");
  }
  if (!(0.0 <= eps2 && eps2 < eps1) || n_multi_update < 1) {
    throw std::invalid_argument("BufferPolicy: invalid update schedule");
  }
}

void to_json(nlohmann::json& j, const BufferPolicy& p) {
  j = {{"low_ratio", p.low_ratio},
       {"high_ratio", p.high_ratio},
       {"p_store_favored", p.p_store_favored},
       {"p_store_disfavored", p.p_store_disfavored},
       {"eps1", p.eps1},
       {"eps2", p.eps2},
       {"p_rare_update", p.p_rare_update},
       {"n_multi_update", p.n_multi_update},
       {"min_fill", p.min_fill},
       {"control_storage", p.control_storage}};
}

void from_json(const nlohmann::json& j, BufferPolicy& p) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("low_ratio", p.low_ratio);
  get("high_ratio", p.high_ratio);
  get("p_store_favored", p.p_store_favored);
  get("p_store_disfavored", p.p_store_disfavored);
  get("eps1", p.eps1);
  get("eps2", p.eps2);
  get("p_rare_update", p.p_rare_update);
  get("n_multi_update", p.n_multi_update);
  get("min_fill", p.min_fill);
  get("control_storage", p.control_storage);
}

PackedFrame::PackedFrame(const Observation& obs)
    : width_(obs.width), height_(obs.height) {
  uLongf len = compressBound(obs.pixels.size());
  bytes_.resize(len);
  if (compress2(bytes_.data(), &len, obs.pixels.data(), obs.pixels.size(),
                Z_BEST_SPEED) != Z_OK) {
    throw std::runtime_error("PackedFrame: deflate failed");
  }
  bytes_.resize(len);
  bytes_.shrink_to_fit();
}

Observation PackedFrame::Unpack() const {
  Observation obs;
  obs.width = width_;
  obs.height = height_;
  obs.pixels.resize(3 * static_cast<std::size_t>(width_) * height_);
  uLongf len = obs.pixels.size();
  if (uncompress(obs.pixels.data(), &len, bytes_.data(), bytes_.size()) !=
          Z_OK ||
      len != obs.pixels.size()) {
    throw std::runtime_error("PackedFrame: inflate failed");
  }
  return obs;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity 0");
}

double ReplayBuffer::SuccessRatio() const {
  if (entries_.empty()) return 0.0;
  return static_cast<double>(success_count_) /
         static_cast<double>(entries_.size());
}

void ReplayBuffer::Append(Entry entry) {
  if (entries_.size() == capacity_) {
    if (entries_.front().episode_success) --success_count_;
    entries_.pop_front();
  }
  if (entry.episode_success) ++success_count_;
  entries_.push_back(std::move(entry));
}

void ReplayBuffer::Push(const Experience& e) {
  Append({std::make_shared<const PackedFrame>(e.obs),
          std::make_shared<const PackedFrame>(e.next_obs), e.action.index(),
          e.reward, e.terminal, e.episode_success});
}

std::size_t ReplayBuffer::PushEpisode(const std::vector<Experience>& episode,
                                      const BufferPolicy& policy, Rng& rng) {
  if (episode.empty()) return 0;
  const bool success = episode.front().episode_success;
  for (const Experience& e : episode) {
    if (e.episode_success != success) {
      throw std::invalid_argument(
          "PushEpisode: experiences disagree on episode_success");
    }
  }
  const double p = policy.control_storage
                       ? StoreProbability(SuccessRatio(), success, policy)
                       : 1.0;

  std::size_t stored = 0;
  // Reuse the packed next_obs of step t as obs of step t + 1.
  std::shared_ptr<const PackedFrame> carried;
  const Observation* carried_source = nullptr;
  for (const Experience& e : episode) {
    const bool keep = p >= 1.0 || rng.Bernoulli(p);
    std::shared_ptr<const PackedFrame> obs_frame;
    if (carried && carried_source && *carried_source == e.obs) {
      obs_frame = carried;
    }
    if (keep) {
      if (!obs_frame) obs_frame = std::make_shared<const PackedFrame>(e.obs);
      auto next_frame = std::make_shared<const PackedFrame>(e.next_obs);
      Append({obs_frame, next_frame, e.action.index(), e.reward, e.terminal,
              e.episode_success});
      carried = next_frame;
      carried_source = &e.next_obs;
      ++stored;
    } else {
      carried.reset();
      carried_source = nullptr;
    }
  }
  return stored;
}

Experience ReplayBuffer::Expand(const Entry& e) const {
  Experience x;
  x.obs = e.obs->Unpack();
  x.action = Action(e.action);
  x.reward = e.reward;
  x.next_obs = e.next_obs->Unpack();
  x.terminal = e.terminal;
  x.episode_success = e.episode_success;
  return x;
}

Experience ReplayBuffer::At(std::size_t i) const {
  return Expand(entries_.at(i));
}

std::vector<Experience> ReplayBuffer::SampleBatch(std::size_t n,
                                                  Rng& rng) const {
  if (entries_.size() < n || n == 0) {
    throw std::invalid_argument("SampleBatch: buffer holds " +
                                std::to_string(entries_.size()) +
                                " entries, requested " + std::to_string(n));
  }
  std::vector<Experience> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.push_back(Expand(entries_[rng.UniformInt(entries_.size())]));
  }
  return batch;
}

std::size_t ReplayBuffer::RecountSuccesses() const {
  std::size_t count = 0;
  for (const Entry& e : entries_) count += e.episode_success ? 1 : 0;
  return count;
}

std::size_t ReplayBuffer::StoredBytes() const {
  std::size_t total = 0;
  const PackedFrame* last = nullptr;
  for (const Entry& e : entries_) {
    if (e.obs.get() != last) total += e.obs->compressed_bytes();
    total += e.next_obs->compressed_bytes();
    last = e.next_obs.get();
  }
  return total;
}

namespace {

constexpr char kReplayMagic[8] = {'P', 'D', 'Q', 'N', 'R', 'P', 'L', 'Y'};
constexpr std::uint32_t kReplayVersion = 1;

template <typename U>
void Put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename U>
U Get(std::istream& in) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error("replay snapshot: truncated");
  }
  return v;
}

}  // namespace

void ReplayBuffer::Save(std::ostream& out) const {
  std::unordered_map<const PackedFrame*, std::uint64_t> index;
  std::vector<const PackedFrame*> frames;
  auto intern = [&](const std::shared_ptr<const PackedFrame>& f) {
    auto [it, inserted] = index.emplace(f.get(), frames.size());
    if (inserted) frames.push_back(f.get());
    return it->second;
  };
  std::vector<std::pair<std::uint64_t, std::uint64_t>> refs;
  refs.reserve(entries_.size());
  for (const Entry& e : entries_) {
    const std::uint64_t a = intern(e.obs);
    refs.emplace_back(a, intern(e.next_obs));
  }

  out.write(kReplayMagic, sizeof(kReplayMagic));
  Put<std::uint32_t>(out, kReplayVersion);
  Put<std::uint64_t>(out, capacity_);
  Put<std::uint64_t>(out, frames.size());
  for (const PackedFrame* f : frames) {
    Put<std::int32_t>(out, f->width());
    Put<std::int32_t>(out, f->height());
    Put<std::uint64_t>(out, f->compressed().size());
    out.write(reinterpret_cast<const char*>(f->compressed().data()),
              static_cast<std::streamsize>(f->compressed().size()));
  }
  Put<std::uint64_t>(out, entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    Put<std::uint64_t>(out, refs[i].first);
    Put<std::uint64_t>(out, refs[i].second);
    Put<std::int32_t>(out, e.action);
    Put<double>(out, e.reward);
    Put<std::uint8_t>(out, e.terminal ? 1 : 0);
    Put<std::uint8_t>(out, e.episode_success ? 1 : 0);
  }
  if (!out) throw std::runtime_error("replay snapshot: write failed");
}

void ReplayBuffer::Load(std::istream& in) {
  char magic[sizeof(kReplayMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::string_view(magic, sizeof(magic)) !=
          std::string_view(kReplayMagic, sizeof(kReplayMagic))) {
    throw std::runtime_error("replay snapshot: bad magic");
  }
  if (Get<std::uint32_t>(in) != kReplayVersion) {
    throw std::runtime_error("replay snapshot: unsupported version");
  }
  const auto capacity = Get<std::uint64_t>(in);
  if (capacity == 0) throw std::runtime_error("replay snapshot: capacity 0");
  const auto n_frames = Get<std::uint64_t>(in);
  std::vector<std::shared_ptr<const PackedFrame>> frames;
  frames.reserve(n_frames);
  for (std::uint64_t i = 0; i < n_frames; ++i) {
    const auto w = Get<std::int32_t>(in);
    const auto h = Get<std::int32_t>(in);
    const auto len = Get<std::uint64_t>(in);
    std::vector<std::uint8_t> bytes(len);
    if (!in.read(reinterpret_cast<char*>(bytes.data()),
                 static_cast<std::streamsize>(len))) {
      throw std::runtime_error("replay snapshot: truncated frame");
    }
    frames.push_back(std::make_shared<const PackedFrame>(w, h, std::move(bytes)));
  }
  const auto n_entries = Get<std::uint64_t>(in);
  if (n_entries > capacity) {
    throw std::runtime_error("replay snapshot: more entries than capacity");
  }
  std::deque<Entry> entries;
  std::size_t successes = 0;
  for (std::uint64_t i = 0; i < n_entries; ++i) {
    const auto a = Get<std::uint64_t>(in);
    const auto b = Get<std::uint64_t>(in);
    if (a >= frames.size() || b >= frames.size()) {
      throw std::runtime_error("replay snapshot: bad frame reference");
    }
    Entry e{frames[a], frames[b], Get<std::int32_t>(in), Get<double>(in),
            Get<std::uint8_t>(in) != 0, Get<std::uint8_t>(in) != 0};
    Action(e.action);  // validates the index
    successes += e.episode_success ? 1 : 0;
    entries.push_back(std::move(e));
  }
  capacity_ = capacity;
  entries_ = std::move(entries);
  success_count_ = successes;
}

double StoreProbability(double ratio, bool episode_success,
                        const BufferPolicy& policy) {
  if (ratio < policy.low_ratio) {
    return episode_success ? policy.p_store_favored
                           : policy.p_store_disfavored;
  }
  if (ratio > policy.high_ratio) {
    return episode_success ? policy.p_store_disfavored
                           : policy.p_store_favored;
  }
  return 1.0;
}

int UpdateCount(double ratio, const BufferPolicy& policy, Rng& rng) {
  const double deviation = std::abs(ratio - 0.5);
  if (deviation >= policy.eps1) return rng.Bernoulli(policy.p_rare_update);
  if (deviation >= policy.eps2) return 1;
  return policy.n_multi_update;
}

}  // namespace pushdqn

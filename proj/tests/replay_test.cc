#include "pushdqn/replay.h"

#include <sstream>

#include <gtest/gtest.h>

namespace pushdqn {
namespace {

Observation Tiny(std::uint8_t v) {
  Observation o;
  o.width = o.height = 1;
  o.pixels = {v, static_cast<std::uint8_t>(v + 1), 7};
  return o;
}

Experience Exp(int id, bool success, bool terminal = false) {
  Experience e;
  e.obs = Tiny(static_cast<std::uint8_t>(id));
  e.next_obs = Tiny(static_cast<std::uint8_t>(id + 1));
  e.action = Action(1 + id % kNumActions);
  e.reward = 0.5 * id;
  e.terminal = terminal;
  e.episode_success = success;
  return e;
}

std::vector<Experience> Episode(int length, bool success, int first_id = 0) {
  std::vector<Experience> ep;
  for (int i = 0; i < length; ++i) {
    ep.push_back(Exp(first_id + i, success, i + 1 == length));
  }
  return ep;
}

// Buffer of `n` entries with `successes` flagged successful.
ReplayBuffer Filled(std::size_t n, std::size_t successes) {
  ReplayBuffer buf(100000);
  for (std::size_t i = 0; i < n; ++i) {
    buf.Push(Exp(static_cast<int>(i % 200), i < successes));
  }
  return buf;
}

TEST(SuccessRatioTest, Examples) {
  EXPECT_EQ(ReplayBuffer(10).SuccessRatio(), 0.0);
  EXPECT_DOUBLE_EQ(Filled(100, 30).SuccessRatio(), 0.3);
  EXPECT_DOUBLE_EQ(Filled(50, 50).SuccessRatio(), 1.0);
}

TEST(StoreProbabilityTest, Regimes) {
  const BufferPolicy p;
  EXPECT_EQ(StoreProbability(0.1, true, p), 1.0);
  EXPECT_EQ(StoreProbability(0.1, false, p), 0.3);
  EXPECT_EQ(StoreProbability(0.9, true, p), 0.3);
  EXPECT_EQ(StoreProbability(0.9, false, p), 1.0);
  EXPECT_EQ(StoreProbability(0.5, true, p), 1.0);
  EXPECT_EQ(StoreProbability(0.3, false, p), 1.0);
  EXPECT_EQ(StoreProbability(0.7, true, p), 1.0);
}

TEST(PushEpisodeTest, BalancedRatioStoresEverything) {
  ReplayBuffer buf = Filled(100, 50);
  Rng rng(1);
  EXPECT_EQ(buf.PushEpisode(Episode(40, false), BufferPolicy{}, rng), 40u);
  EXPECT_EQ(buf.size(), 140u);
}

TEST(PushEpisodeTest, LowRatioThinsFailures) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    ReplayBuffer buf = Filled(100, 10);
    const std::size_t stored =
        buf.PushEpisode(Episode(100, false), BufferPolicy{}, rng);
    EXPECT_GE(stored, 16u);
    EXPECT_LE(stored, 44u);
  }
}

TEST(PushEpisodeTest, RatioReadOnceAtEpisodeStart) {
  // An all-success buffer: failures are favored for the whole episode even
  // though the ratio falls while it is being stored.
  ReplayBuffer buf = Filled(10, 10);
  Rng rng(4);
  EXPECT_EQ(buf.PushEpisode(Episode(100, false), BufferPolicy{}, rng), 100u);
}

TEST(PushEpisodeTest, UncontrolledStoresEverything) {
  ReplayBuffer buf = Filled(100, 0);
  BufferPolicy p;
  p.control_storage = false;
  Rng rng(4);
  EXPECT_EQ(buf.PushEpisode(Episode(100, false), p, rng), 100u);
}

TEST(PushEpisodeTest, PreservesContentsAndOrder) {
  ReplayBuffer buf(100);
  Rng rng(5);
  const std::vector<Experience> ep = Episode(6, true, 20);
  buf.PushEpisode(ep, BufferPolicy{}, rng);
  ASSERT_EQ(buf.size(), 6u);
  for (std::size_t i = 0; i < ep.size(); ++i) {
    const Experience e = buf.At(i);
    EXPECT_EQ(e.obs, ep[i].obs);
    EXPECT_EQ(e.next_obs, ep[i].next_obs);
    EXPECT_EQ(e.action, ep[i].action);
    EXPECT_EQ(e.reward, ep[i].reward);
    EXPECT_EQ(e.terminal, ep[i].terminal);
    EXPECT_TRUE(e.episode_success);
  }
}

TEST(EvictionTest, FullBufferDropsOldest) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 3; ++i) buf.Push(Exp(i, i == 0));
  EXPECT_EQ(buf.success_count(), 1u);
  buf.Push(Exp(10, false));
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.At(0).obs, Tiny(1));
  EXPECT_EQ(buf.At(2).obs, Tiny(10));
  EXPECT_EQ(buf.success_count(), 0u);
}

TEST(EvictionTest, CountInvariantUnderRandomInterleaving) {
  ReplayBuffer buf(250);
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    const bool success = rng.Bernoulli(0.3);
    const int len = 1 + static_cast<int>(rng.UniformInt(30));
    if (rng.Bernoulli(0.5)) {
      buf.PushEpisode(Episode(len, success, i % 100), BufferPolicy{}, rng);
    } else {
      buf.Push(Exp(i % 200, success));
    }
    ASSERT_LE(buf.size(), buf.capacity());
    ASSERT_EQ(buf.success_count(), buf.RecountSuccesses());
  }
}

TEST(SampleBatchTest, Examples) {
  ReplayBuffer one(5);
  one.Push(Exp(4, true));
  Rng rng(7);
  const auto batch = one.SampleBatch(1, rng);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].obs, Tiny(4));
  EXPECT_THROW(one.SampleBatch(2, rng), std::invalid_argument);
  EXPECT_EQ(Filled(10000, 0).SampleBatch(32, rng).size(), 32u);
}

TEST(SampleBatchTest, DeterministicUnderSeed) {
  const ReplayBuffer buf = Filled(500, 100);
  Rng a(8);
  Rng b(8);
  const auto x = buf.SampleBatch(64, a);
  const auto y = buf.SampleBatch(64, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].obs, y[i].obs);
}

TEST(SampleBatchTest, UniformOverEntries) {
  ReplayBuffer buf(10);
  for (int i = 0; i < 10; ++i) buf.Push(Exp(10 * i, false));
  Rng rng(9);
  std::array<int, 10> counts{};
  const int n = 1000000;
  for (int drawn = 0; drawn < n; drawn += 10) {
    for (const Experience& e : buf.SampleBatch(10, rng)) {
      ++counts[e.obs.pixels[0] / 10];
    }
  }
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), 0.1, 0.002);
}

TEST(UpdateCountTest, Schedule) {
  const BufferPolicy p;
  Rng rng(10);
  EXPECT_EQ(UpdateCount(0.5, p, rng), 4);
  EXPECT_EQ(UpdateCount(0.2, p, rng), 1);
  EXPECT_EQ(UpdateCount(0.75, p, rng), 1);
  EXPECT_EQ(UpdateCount(0.45, p, rng), 4);
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const int c = UpdateCount(0.95, p, rng);
    ASSERT_TRUE(c == 0 || c == 1);
    total += c;
  }
  EXPECT_NEAR(total / 100000, 0.1, 0.01);
  EXPECT_LE(UpdateCount(0.0, p, rng), 1);
}

double SteadyStateRatio(bool controlled) {
  ReplayBuffer buf(10000);
  BufferPolicy policy;
  policy.control_storage = controlled;
  Rng rng(controlled ? 11 : 12);
  const std::vector<Experience> success = Episode(20, true);
  const std::vector<Experience> failure = Episode(20, false);
  double sum = 0.0;
  int samples = 0;
  for (int i = 0; i < 8000; ++i) {
    buf.PushEpisode(rng.Bernoulli(0.1) ? success : failure, policy, rng);
    if (i >= 4000) {
      sum += buf.SuccessRatio();
      ++samples;
    }
  }
  return sum / samples;
}

TEST(SteadyStateTest, ControlPullsRatioTowardBalance) {
  const double controlled = SteadyStateRatio(true);
  const double uncontrolled = SteadyStateRatio(false);
  EXPECT_NEAR(controlled, 0.1 / (0.1 + 0.9 * 0.3), 0.03);
  EXPECT_NEAR(uncontrolled, 0.10, 0.02);
  EXPECT_LT(std::abs(controlled - 0.5), std::abs(uncontrolled - 0.5));
}

TEST(PackedFrameTest, LosslessAndShared) {
  GeometryConfig cfg;
  const Observation a = Render(MakeScenario(2, 2, cfg), cfg, 64);
  const PackedFrame packed(a);
  EXPECT_EQ(packed.Unpack(), a);
  EXPECT_LT(packed.compressed_bytes(), a.pixels.size());

  // Consecutive transitions share one frame.
  ReplayBuffer buf(100);
  Rng rng(1);
  std::vector<Experience> ep = Episode(10, true);
  for (Experience& e : ep) {
    e.obs = a;
    e.next_obs = a;
  }
  buf.PushEpisode(ep, BufferPolicy{}, rng);
  EXPECT_EQ(buf.StoredBytes(), 11 * packed.compressed_bytes());
}

TEST(SnapshotTest, SaveLoadRoundTrip) {
  ReplayBuffer buf(50);
  Rng rng(13);
  for (int i = 0; i < 8; ++i) {
    buf.PushEpisode(Episode(9, i % 3 == 0, 10 * i), BufferPolicy{}, rng);
  }
  std::stringstream stream;
  buf.Save(stream);
  ReplayBuffer copy(1);
  copy.Load(stream);
  ASSERT_EQ(copy.size(), buf.size());
  EXPECT_EQ(copy.capacity(), buf.capacity());
  EXPECT_EQ(copy.success_count(), buf.success_count());
  EXPECT_EQ(copy.StoredBytes(), buf.StoredBytes());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    EXPECT_EQ(copy.At(i).obs, buf.At(i).obs);
    EXPECT_EQ(copy.At(i).next_obs, buf.At(i).next_obs);
    EXPECT_EQ(copy.At(i).reward, buf.At(i).reward);
    EXPECT_EQ(copy.At(i).action, buf.At(i).action);
  }
  Rng r1(2);
  Rng r2(2);
  EXPECT_EQ(buf.SampleBatch(5, r1)[3].obs, copy.SampleBatch(5, r2)[3].obs);
}

TEST(SnapshotTest, RejectsGarbage) {
  std::stringstream stream("not a replay snapshot");
  ReplayBuffer buf(10);
  EXPECT_THROW(buf.Load(stream), std::runtime_error);
}

TEST(BufferPolicyTest, JsonRoundTripAndValidation) {
  BufferPolicy p;
  p.eps2 = 0.05;
  p.min_fill = 7;
  EXPECT_EQ(nlohmann::json(p).get<BufferPolicy>(), p);
  BufferPolicy bad;
  bad.eps1 = 0.05;  // below eps2
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace pushdqn

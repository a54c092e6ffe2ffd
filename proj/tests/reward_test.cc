#include "pushdqn/reward.h"

#include <cmath>

#include <gtest/gtest.h>

namespace pushdqn {
namespace {

WorldState At(Vec2 tool, Vec2 object, Vec2 target) {
  WorldState w;
  w.tool_pose = tool;
  w.object_pose = object;
  w.target_pose = target;
  return w;
}

TEST(RewardToolTest, SignedDistanceChange) {
  const WorldState a = At({0, 0}, {0, 10}, {40, 20});
  const WorldState b = At({0, 1}, {0, 10}, {40, 20});
  EXPECT_DOUBLE_EQ(RewardTool(a, b, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(RewardTool(a, a, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(RewardTool(b, a, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(RewardTool(a, b, 2.0), 0.5);
}

TEST(RewardTargetTest, SignedDistanceChange) {
  const WorldState a = At({0, 0}, {10, 10}, {10, 20});
  const WorldState b = At({0, 0}, {10, 11}, {10, 20});
  EXPECT_DOUBLE_EQ(RewardTarget(a, b, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(RewardTarget(a, a, 1.0), 0.0);
}

TEST(RewardTargetTest, PerpendicularPushLosesDistance) {
  const WorldState a = At({0, 0}, {10, 10}, {10, 20});
  const WorldState b = At({0, 0}, {11, 10}, {10, 20});
  EXPECT_NEAR(RewardTarget(a, b, 1.0), 10.0 - std::sqrt(101.0), 1e-15);
  EXPECT_NEAR(RewardTarget(a, b, 1.0), -0.0499, 1e-4);
}

TEST(RewardTargetTest, UsesEachStatesOwnTarget) {
  const WorldState a = At({0, 0}, {10, 10}, {10, 20});
  const WorldState b = At({0, 0}, {10, 10}, {10, 15});
  EXPECT_DOUBLE_EQ(RewardTarget(a, b, 1.0), 5.0);
}

TEST(RewardTerminalTest, OutcomeValues) {
  EXPECT_EQ(RewardTerminal(Status::kSuccess), 1.0);
  EXPECT_EQ(RewardTerminal(Status::kFailCollision), -1.0);
  EXPECT_EQ(RewardTerminal(Status::kFailOutOfSurface), -1.0);
  EXPECT_EQ(RewardTerminal(Status::kFailTimeout), -1.0);
  EXPECT_EQ(RewardTerminal(Status::kRunning), 0.0);
}

TEST(RewardTotalTest, WeightedSum) {
  const RewardWeights w;
  const WorldState a = At({0, 0}, {0, 10}, {0, 20});
  const WorldState tool_closer = At({0, 1}, {0, 10}, {0, 20});
  EXPECT_DOUBLE_EQ(RewardTotal(a, tool_closer, Status::kRunning, w, 1.0), 0.1);
  const WorldState object_closer = At({0, 2}, {0, 11}, {0, 20});
  // Tool and object move together: r_tool = 0, r_target = 1.
  EXPECT_DOUBLE_EQ(
      RewardTotal(tool_closer, object_closer, Status::kSuccess, w, 1.0), 1.2);
  EXPECT_DOUBLE_EQ(RewardTotal(a, a, Status::kRunning, w, 1.0), 0.0);
}

TEST(RewardTotalTest, LinearInWeights) {
  const WorldState a = At({1, 2}, {5, 9}, {20, 25});
  const WorldState b = At({1.7, 2.7}, {5.2, 9.9}, {20, 25});
  const RewardWeights w1{0.3, -0.4, 2.0};
  const RewardWeights w2{1.5, 0.25, -0.5};
  const RewardWeights sum{1.8, -0.15, 1.5};
  for (Status s : {Status::kRunning, Status::kSuccess, Status::kFailTimeout}) {
    EXPECT_NEAR(RewardTotal(a, b, s, sum, 1.0),
                RewardTotal(a, b, s, w1, 1.0) + RewardTotal(a, b, s, w2, 1.0),
                1e-12);
  }
}

// Random recorded episodes: the per-step components telescope to the net
// change in distance.
TEST(RewardPropertyTest, TelescopingAndBoundsOverRandomEpisodes) {
  GeometryConfig cfg;
  Rng rng(10);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    WorldState w = MakeScenario(seed, 2, cfg);
    const WorldState start = w;
    double sum_target = 0.0;
    double sum_tool = 0.0;
    Status status = Status::kRunning;
    while (!IsTerminal(status)) {
      const StepResult r =
          Step(w, Action(1 + static_cast<int>(rng.UniformInt(5))), cfg);
      const double rt = RewardTarget(w, r.world, cfg.d_a);
      const double rtool = RewardTool(w, r.world, cfg.d_a);
      EXPECT_LE(std::abs(rt), 1.0 + 1e-12);
      EXPECT_LE(std::abs(rtool), 1.0 + 1e-12);
      sum_target += rt * cfg.d_a;
      sum_tool += rtool * cfg.d_a;
      w = r.world;
      status = r.status;
    }
    EXPECT_NEAR(sum_target,
                Distance(start.object_pose, start.target_pose) -
                    Distance(w.object_pose, w.target_pose),
                1e-9);
    EXPECT_NEAR(sum_tool,
                Distance(start.tool_pose, start.object_pose) -
                    Distance(w.tool_pose, w.object_pose),
                1e-9);
  }
}

TEST(RewardWeightsTest, DefaultsAndJson) {
  const RewardWeights w;
  EXPECT_EQ(w.alpha1, 0.1);
  EXPECT_EQ(w.alpha2, 0.2);
  EXPECT_EQ(w.alpha3, 1.0);
  const RewardWeights c{0.5, 0.6, 0.7};
  EXPECT_EQ(nlohmann::json(c).get<RewardWeights>(), c);
}

}  // namespace
}  // namespace pushdqn

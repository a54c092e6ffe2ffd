#include "pushdqn/env.h"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

namespace pushdqn {
namespace {

const Vec2 kObjectHalf{2.0, 2.0};
const Vec2 kObstacleHalf{2.0, 2.0};

// Exit point of B along dir found by bisection on the overlap predicate.
double BisectPenetration(const Vec2& a, const Vec2& ah, const Vec2& b,
                         const Vec2& bh, const Vec2& dir) {
  if (!BoxesOverlap(a, ah, b, bh)) return 0.0;
  double lo = 0.0;
  double hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (BoxesOverlap(a, ah, b + dir * mid, bh)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Depth of the shallower axis overlap; <= 0 when the boxes are apart.
double OverlapDepth(const Vec2& a, const Vec2& ah, const Vec2& b,
                    const Vec2& bh) {
  return std::min(ah.x + bh.x - std::abs(a.x - b.x),
                  ah.y + bh.y - std::abs(a.y - b.y));
}

// Resolved contacts may keep a rounding-level sliver of overlap.
constexpr double kContact = 1e-9;

WorldState OpenWorld() {
  WorldState w;
  w.tool_pose = {25.0, 5.0};
  w.object_pose = {25.0, 20.0};
  w.target_pose = {10.0, 25.0};
  return w;
}

TEST(ActionTest, DirectionsFollowFortyFiveDegreeFan) {
  for (int k = 1; k <= 5; ++k) {
    const Action a(k);
    const double psi = (k - 1) * M_PI / 4.0;
    EXPECT_NEAR(a.Direction().x, std::cos(psi), 1e-15);
    EXPECT_NEAR(a.Direction().y, std::sin(psi), 1e-15);
    EXPECT_GE(a.Direction().y, 0.0);
    EXPECT_NEAR(a.Direction().Norm(), 1.0, 1e-15);
  }
  EXPECT_EQ(Action(3).Direction(), (Vec2{0.0, 1.0}));
  EXPECT_EQ(Action(1).Direction(), (Vec2{1.0, 0.0}));
  EXPECT_EQ(Action(5).Direction(), (Vec2{-1.0, 0.0}));
}

TEST(ActionTest, RejectsOutOfRangeIndex) {
  EXPECT_THROW(Action(0), std::invalid_argument);
  EXPECT_THROW(Action(6), std::invalid_argument);
}

TEST(StatusTest, NamesRoundTrip) {
  for (Status s : {Status::kRunning, Status::kSuccess, Status::kFailCollision,
                   Status::kFailOutOfSurface, Status::kFailTimeout}) {
    EXPECT_EQ(StatusFromName(StatusName(s)), s);
  }
  EXPECT_THROW(StatusFromName("nope"), std::invalid_argument);
}

TEST(PenetrationDepthTest, DisjointBoxesGiveZero) {
  EXPECT_EQ(PenetrationDepth({0, 0}, {1, 1}, {5, 5}, {1, 1}, {0, 1}), 0.0);
}

TEST(PenetrationDepthTest, IdenticalUnitSquaresAlongY) {
  EXPECT_DOUBLE_EQ(PenetrationDepth({0, 0}, {1, 1}, {0, 0}, {1, 1}, {0, 1}),
                   2.0);
}

TEST(PenetrationDepthTest, ShallowOverlapAlongY) {
  // B's lower face sits 0.3 below A's upper face.
  EXPECT_NEAR(PenetrationDepth({0, 0}, {1, 1}, {0, 1.7}, {1, 1}, {0, 1}), 0.3,
              1e-12);
}

TEST(PenetrationDepthTest, MatchesBisectionOracleOnRandomPairs) {
  Rng rng(2024);
  int overlapping = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 a{rng.Uniform(-2, 2), rng.Uniform(-2, 2)};
    const Vec2 ah{rng.Uniform(0.3, 3), rng.Uniform(0.3, 3)};
    const Vec2 b{rng.Uniform(-2, 2), rng.Uniform(-2, 2)};
    const Vec2 bh{rng.Uniform(0.3, 3), rng.Uniform(0.3, 3)};
    Vec2 dir;
    if (i % 2 == 0) {
      dir = Action(1 + static_cast<int>(rng.UniformInt(5))).Direction();
    } else {
      const double t = rng.Uniform(0, M_PI);
      dir = {std::cos(t), std::sin(t)};
    }
    overlapping += BoxesOverlap(a, ah, b, bh) ? 1 : 0;
    EXPECT_NEAR(PenetrationDepth(a, ah, b, bh, dir),
                BisectPenetration(a, ah, b, bh, dir), 1e-9)
        << "pair " << i;
  }
  EXPECT_GT(overlapping, 500);
}

TEST(BoxGapTest, MeasuresEuclideanClearance) {
  EXPECT_DOUBLE_EQ(BoxGap({0, 0}, {1, 1}, {5, 0}, {1, 1}), 3.0);
  EXPECT_DOUBLE_EQ(BoxGap({0, 0}, {1, 1}, {5, 6}, {1, 1}), 5.0);
  EXPECT_DOUBLE_EQ(BoxGap({0, 0}, {1, 1}, {1, 1}, {1, 1}), 0.0);
}

TEST(StepTest, FreeMotionMovesOnlyTheTool) {
  GeometryConfig cfg;
  const StepResult r = Step(OpenWorld(), Action(3), cfg);
  EXPECT_EQ(r.world.tool_pose, (Vec2{25.0, 6.0}));
  EXPECT_EQ(r.world.object_pose, (Vec2{25.0, 20.0}));
  EXPECT_EQ(r.world.step_count, 1);
  EXPECT_EQ(r.status, Status::kRunning);
}

TEST(StepTest, FlushPushAdvancesObjectByExactlyOneStep) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  // Tool top face at y = 5.5, object bottom face at y = 7.5 - 2 = 5.5.
  w.object_pose = {25.0, 7.5};
  const StepResult r = Step(w, Action(3), cfg);
  EXPECT_DOUBLE_EQ(r.world.object_pose.y, 8.5);
  EXPECT_DOUBLE_EQ(r.world.object_pose.x, 25.0);
}

TEST(StepTest, DiagonalPushResolvesAlongMotion) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.object_pose = {25.0, 7.5};
  const StepResult r = Step(w, Action(2), cfg);
  const Vec2 dir = Action(2).Direction();
  // Tool moves up by 1/sqrt2; the object must leave along dir until the
  // faces separate, a shift of (1/sqrt2) / dir.y = 1 along dir.
  EXPECT_NEAR(r.world.object_pose.x, 25.0 + dir.x, 1e-12);
  EXPECT_NEAR(r.world.object_pose.y, 7.5 + dir.y, 1e-12);
  EXPECT_FALSE(BoxesOverlap(r.world.tool_pose, cfg.tool_half_extents,
                            r.world.object_pose, kObjectHalf));
}

TEST(StepTest, PushingObjectIntoObstacleIsACollision) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.object_pose = {25.0, 7.5};
  w.obstacles = {{25.0, 11.5}};  // touching the object's top face
  w.obstacle_initial = w.obstacles;
  w.cumulative_obstacle_displacement = {0.0};
  const StepResult r = Step(w, Action(3), cfg);
  EXPECT_DOUBLE_EQ(r.world.obstacles[0].y, 12.5);
  EXPECT_DOUBLE_EQ(r.world.cumulative_obstacle_displacement[0], 1.0);
  EXPECT_EQ(r.status, Status::kFailCollision);
}

TEST(StepTest, ToolHittingObstacleDirectlyIsACollision) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.obstacles = {{25.0, 7.5}};
  w.obstacle_initial = w.obstacles;
  w.cumulative_obstacle_displacement = {0.0};
  const StepResult r = Step(w, Action(3), cfg);
  EXPECT_EQ(r.status, Status::kFailCollision);
}

TEST(StepTest, DistractorIsPushedWithoutFailure) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.distractors = {{25.0, 7.5}};
  const StepResult r = Step(w, Action(3), cfg);
  EXPECT_DOUBLE_EQ(r.world.distractors[0].y, 8.5);
  EXPECT_EQ(r.status, Status::kRunning);
}

TEST(StepTest, SteppingTerminalWorldThrows) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.object_pose = w.target_pose;
  EXPECT_THROW(Step(w, Action(3), cfg), std::logic_error);
}

TEST(StepTest, SlipJittersOnlyWhilePushing) {
  GeometryConfig cfg;
  cfg.slip_sigma = 0.3;
  WorldState w = OpenWorld();
  w.rng = Rng(5);
  const StepResult free = Step(w, Action(3), cfg);
  EXPECT_EQ(free.world.object_pose, w.object_pose);

  w.object_pose = {25.0, 7.5};
  double lateral = 0.0;
  WorldState cur = w;
  for (int i = 0; i < 5; ++i) {
    cur = Step(cur, Action(3), cfg).world;
    lateral = std::max(lateral, std::abs(cur.object_pose.x - 25.0));
  }
  EXPECT_GT(lateral, 0.0);
}

TEST(TerminationTest, ObjectOnTargetIsSuccess) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.object_pose = w.target_pose;
  EXPECT_EQ(Termination(w, cfg), Status::kSuccess);
}

TEST(TerminationTest, TimeoutAtStepLimit) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.step_count = 150;
  EXPECT_EQ(Termination(w, cfg), Status::kFailTimeout);
  w.step_count = 149;
  EXPECT_EQ(Termination(w, cfg), Status::kRunning);
}

TEST(TerminationTest, ToolCornerOffSurface) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.tool_pose = {0.2, 10.0};
  EXPECT_EQ(Termination(w, cfg), Status::kFailOutOfSurface);
}

TEST(TerminationTest, ObjectCornerOffSurface) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.object_pose = {49.0, 20.0};
  EXPECT_EQ(Termination(w, cfg), Status::kFailOutOfSurface);
}

TEST(TerminationTest, PrecedenceSuccessCollisionSurfaceTimeout) {
  GeometryConfig cfg;
  WorldState w = OpenWorld();
  w.obstacles = {{40.0, 20.0}};
  w.obstacle_initial = {{39.0, 20.0}};
  w.cumulative_obstacle_displacement = {1.0};
  w.tool_pose = {0.2, 10.0};
  w.step_count = 150;
  EXPECT_EQ(Termination(w, cfg), Status::kFailCollision);
  w.object_pose = w.target_pose;
  EXPECT_EQ(Termination(w, cfg), Status::kSuccess);
  w.object_pose = {25.0, 20.0};
  w.cumulative_obstacle_displacement = {0.0};
  EXPECT_EQ(Termination(w, cfg), Status::kFailOutOfSurface);
  w.tool_pose = {25.0, 10.0};
  EXPECT_EQ(Termination(w, cfg), Status::kFailTimeout);
}

TEST(ScenarioTest, NoObstaclesAndObjectAhead) {
  GeometryConfig cfg;
  const WorldState w = MakeScenario(7, 0, cfg);
  EXPECT_TRUE(w.obstacles.empty());
  EXPECT_GT(w.object_pose.y, w.tool_pose.y);
  EXPECT_EQ(w.tool_pose, ToolStartPose(cfg));
  EXPECT_EQ(Termination(w, cfg), Status::kRunning);
}

TEST(ScenarioTest, SameSeedSameWorld) {
  GeometryConfig cfg;
  EXPECT_EQ(MakeScenario(7, 2, cfg), MakeScenario(7, 2, cfg));
  EXPECT_NE(MakeScenario(7, 2, cfg).object_pose,
            MakeScenario(8, 2, cfg).object_pose);
}

TEST(ScenarioTest, FirstObstacleBlocksTheDirectRoute) {
  GeometryConfig cfg;
  const WorldState w = MakeScenario(42, 2, cfg);
  ASSERT_EQ(w.obstacles.size(), 2u);
  bool blocking = false;
  for (const Vec2& o : w.obstacles) {
    blocking |= DistanceToSegment(o, w.object_pose, w.target_pose) <= 2.0;
  }
  EXPECT_TRUE(blocking);
}

TEST(ScenarioTest, GeneratedScenesSatisfyPlacementRules) {
  GeometryConfig cfg;
  const Vec2 th = cfg.tool_half_extents;
  const Vec2 tgt{cfg.target_half_extent, cfg.target_half_extent};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int n = static_cast<int>(seed % 4);
    const WorldState w = MakeScenario(seed, n, cfg);
    ASSERT_EQ(static_cast<int>(w.obstacles.size()), n);
    EXPECT_EQ(w.obstacle_initial, w.obstacles);
    EXPECT_EQ(w.step_count, 0);
    EXPECT_GT(w.object_pose.y, w.tool_pose.y);
    EXPECT_GT(w.target_pose.y, w.tool_pose.y);
    EXPECT_GE(BoxGap(w.tool_pose, th, w.object_pose, kObjectHalf), 2.0);
    EXPECT_GE(BoxGap(w.object_pose, kObjectHalf, w.target_pose, tgt), 2.0);
    for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
      const Vec2& o = w.obstacles[i];
      EXPECT_GE(BoxGap(o, kObstacleHalf, w.tool_pose, th), 2.0);
      EXPECT_GE(BoxGap(o, kObstacleHalf, w.object_pose, kObjectHalf), 2.0);
      EXPECT_GE(BoxGap(o, kObstacleHalf, w.target_pose, tgt), 2.0);
      for (std::size_t j = 0; j < i; ++j) {
        EXPECT_GE(BoxGap(o, kObstacleHalf, w.obstacles[j], kObstacleHalf), 2.0);
      }
    }
    if (n >= 1) {
      EXPECT_LE(DistanceToSegment(w.obstacles[0], w.object_pose, w.target_pose),
                2.0 + 1e-12);
    }
    EXPECT_TRUE(ScenarioFeasible(w, cfg));
    EXPECT_EQ(Termination(w, cfg), Status::kRunning);
  }
}

TEST(ScenarioTest, OverConstrainedConfigReportsGenerationFailure) {
  GeometryConfig cfg;
  cfg.surface_width = 14.0;
  cfg.surface_height = 14.0;
  EXPECT_THROW(MakeScenario(1, 4, cfg), GenerationFailure);
}

TEST(ScenarioTest, RejectsNegativeObstacleCount) {
  EXPECT_THROW(MakeScenario(1, -1, GeometryConfig{}), std::invalid_argument);
}

// Random rollouts checked against the simulator's invariants.
TEST(StepPropertyTest, RandomRolloutsKeepInvariants) {
  for (double slip : {0.0, 0.3}) {
    GeometryConfig cfg;
    cfg.slip_sigma = slip;
    Rng rng(77);
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
      WorldState w = MakeScenario(seed, 3, cfg);
      if (seed % 3 == 0) w.distractors.push_back({5.0, 25.0});
      std::vector<double> prev_disp = w.cumulative_obstacle_displacement;
      Status status = Status::kRunning;
      while (!IsTerminal(status)) {
        const Action a(1 + static_cast<int>(rng.UniformInt(5)));
        const StepResult r = Step(w, a, cfg);
        EXPECT_GE(r.world.tool_pose.y, w.tool_pose.y);
        EXPECT_LE(r.world.step_count, cfg.n_steps);
        EXPECT_LE(OverlapDepth(r.world.tool_pose, cfg.tool_half_extents,
                               r.world.object_pose, kObjectHalf),
                  kContact);
        for (std::size_t i = 0; i < r.world.obstacles.size(); ++i) {
          const Vec2& o = r.world.obstacles[i];
          EXPECT_LE(OverlapDepth(o, kObstacleHalf, r.world.object_pose,
                                 kObjectHalf),
                    kContact);
          EXPECT_LE(OverlapDepth(o, kObstacleHalf, r.world.tool_pose,
                                 cfg.tool_half_extents),
                    kContact);
          for (std::size_t j = 0; j < i; ++j) {
            EXPECT_LE(OverlapDepth(o, kObstacleHalf, r.world.obstacles[j],
                                   kObstacleHalf),
                      kContact);
          }
          EXPECT_DOUBLE_EQ(r.world.cumulative_obstacle_displacement[i],
                           Distance(o, r.world.obstacle_initial[i]));
          EXPECT_GE(r.world.cumulative_obstacle_displacement[i],
                    prev_disp[i] - 1e-12);
        }
        prev_disp = r.world.cumulative_obstacle_displacement;
        w = r.world;
        status = r.status;
      }
    }
  }
}

TEST(StepPropertyTest, ReplayReproducesFinalState) {
  for (double slip : {0.0, 0.5}) {
    GeometryConfig cfg;
    cfg.slip_sigma = slip;
    Rng rng(3);
    const WorldState start = MakeScenario(11, 2, cfg);
    std::vector<Action> actions;
    WorldState w = start;
    Status status = Status::kRunning;
    while (!IsTerminal(status)) {
      actions.emplace_back(1 + static_cast<int>(rng.UniformInt(5)));
      StepResult r = Step(w, actions.back(), cfg);
      w = r.world;
      status = r.status;
    }
    WorldState replay = start;
    for (const Action& a : actions) replay = Step(replay, a, cfg).world;
    EXPECT_EQ(replay, w);
  }
}

TEST(GeometryConfigTest, JsonRoundTripAndDefaults) {
  GeometryConfig cfg;
  cfg.slip_sigma = 0.25;
  cfg.tool_half_extents = {2.5, 0.75};
  EXPECT_EQ(nlohmann::json(cfg).get<GeometryConfig>(), cfg);
  const auto partial = nlohmann::json{{"n_steps", 99}}.get<GeometryConfig>();
  EXPECT_EQ(partial.n_steps, 99);
  EXPECT_EQ(partial.surface_width, 50.0);
  EXPECT_EQ(partial.d_a, 1.0);
}

TEST(GeometryConfigTest, ValidateRejectsBadValues) {
  GeometryConfig cfg;
  cfg.object_half_extent = -1.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = GeometryConfig{};
  cfg.d_a = 0.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = GeometryConfig{};
  cfg.eps_suc = 0.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
}

TEST(GeometryTest, DistanceToSegment) {
  EXPECT_DOUBLE_EQ(DistanceToSegment({0, 1}, {-1, 0}, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(DistanceToSegment({3, 4}, {0, 0}, {0, 0}), 5.0);
  EXPECT_DOUBLE_EQ(DistanceToSegment({4, 0}, {0, 0}, {1, 0}), 3.0);
}

}  // namespace
}  // namespace pushdqn

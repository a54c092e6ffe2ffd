#include "pushdqn/env.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <set>
#include <utility>

namespace pushdqn {

namespace {

// Contacts shallower than this are treated as touching, not overlapping.
constexpr double kContactTolerance = 1e-9;

const std::array<Vec2, kNumActions> kDirections = {{
    {1.0, 0.0},
    {std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2},
    {0.0, 1.0},
    {-std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2},
    {-1.0, 0.0},
}};

constexpr std::array<std::string_view, 5> kStatusNames = {
    "running", "success", "fail_collision", "fail_out_of_surface",
    "fail_timeout"};

Vec2 Square(double half) { return {half, half}; }

bool BoxInside(const Vec2& c, const Vec2& half, const GeometryConfig& cfg) {
  return c.x - half.x >= 0.0 && c.x + half.x <= cfg.surface_width &&
         c.y - half.y >= 0.0 && c.y + half.y <= cfg.surface_height;
}

bool DeepOverlap(const Vec2& a, const Vec2& a_half, const Vec2& b,
                 const Vec2& b_half) {
  return std::abs(b.x - a.x) < a_half.x + b_half.x - kContactTolerance &&
         std::abs(b.y - a.y) < a_half.y + b_half.y - kContactTolerance;
}

// A movable body during contact resolution.
struct Body {
  Vec2* center;
  Vec2 half;
};

// Moves `bodies[index]` by `delta` and pushes whatever it now overlaps along
// the same direction, recursively.
void PushBody(std::vector<Body>& bodies, std::size_t index, const Vec2& delta) {
  *bodies[index].center += delta;
  const double len = delta.Norm();
  if (len == 0.0) return;
  const Vec2 dir = delta * (1.0 / len);
  for (std::size_t j = 0; j < bodies.size(); ++j) {
    if (j == index || !DeepOverlap(*bodies[index].center, bodies[index].half,
                                   *bodies[j].center, bodies[j].half)) {
      continue;
    }
    const double s =
        PenetrationDepth(*bodies[index].center, bodies[index].half,
                         *bodies[j].center, bodies[j].half, dir);
    PushBody(bodies, j, dir * s);
  }
}

// Pushes every body overlapping the (already moved) tool along dir.
// Returns how far the manipulation object (index 0) travelled.
double ResolveFromTool(const Vec2& tool, const Vec2& tool_half,
                       std::vector<Body>& bodies, const Vec2& dir) {
  const Vec2 object_before = *bodies[0].center;
  for (std::size_t j = 0; j < bodies.size(); ++j) {
    if (!DeepOverlap(tool, tool_half, *bodies[j].center, bodies[j].half)) {
      continue;
    }
    PushBody(bodies, j,
             dir * PenetrationDepth(tool, tool_half, *bodies[j].center,
                                    bodies[j].half, dir));
  }
  return Distance(*bodies[0].center, object_before);
}

bool ToolCanReachObject(const WorldState& w, const GeometryConfig& cfg) {
  const Vec2 obj_half = Square(cfg.object_half_extent);
  const Vec2 obs_half = Square(cfg.obstacle_half_extent);
  const Vec2 th = cfg.tool_half_extents;
  auto valid = [&](const Vec2& p) {
    if (!BoxInside(p, th, cfg)) return false;
    if (BoxesOverlap(p, th, w.object_pose, obj_half)) return false;
    for (const Vec2& o : w.obstacles) {
      if (BoxGap(p, th, o, obs_half) < 0.5) return false;
    }
    return true;
  };
  auto goal = [&](const Vec2& p) {
    const double top = p.y + th.y;
    const double bottom = w.object_pose.y - cfg.object_half_extent;
    return top <= bottom && top >= bottom - 1.5 &&
           std::abs(p.x - w.object_pose.x) <= cfg.object_half_extent;
  };
  const Vec2 start = w.tool_pose;
  std::set<std::pair<int, int>> seen{{0, 0}};
  std::deque<std::pair<int, int>> queue{{0, 0}};
  while (!queue.empty()) {
    auto [i, j] = queue.front();
    queue.pop_front();
    const Vec2 p{start.x + i, start.y + j};
    if (goal(p)) return true;
    for (auto [di, dj] : {std::pair{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}) {
      const std::pair<int, int> n{i + di, j + dj};
      const Vec2 q{start.x + n.first, start.y + n.second};
      if (!seen.contains(n) && valid(q)) {
        seen.insert(n);
        queue.push_back(n);
      }
    }
  }
  return false;
}

bool ObjectCanReachTarget(const WorldState& w, const GeometryConfig& cfg) {
  const Vec2 obj_half = Square(cfg.object_half_extent);
  const Vec2 obs_half = Square(cfg.obstacle_half_extent);
  // Room for the tool beside the object while steering it.
  const double inflate = 2.0 * cfg.tool_half_extents.y;
  auto valid = [&](const Vec2& p) {
    if (!BoxInside(p, obj_half, cfg)) return false;
    for (const Vec2& o : w.obstacles) {
      if (BoxGap(p, obj_half, o, obs_half) < inflate) return false;
    }
    return true;
  };
  const Vec2 start = w.object_pose;
  std::set<std::pair<int, int>> seen{{0, 0}};
  std::deque<std::pair<int, int>> queue{{0, 0}};
  while (!queue.empty()) {
    auto [i, j] = queue.front();
    queue.pop_front();
    const Vec2 p{start.x + i, start.y + j};
    if (Distance(p, w.target_pose) < cfg.eps_suc) return true;
    for (auto [di, dj] : {std::pair{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}) {
      const std::pair<int, int> n{i + di, j + dj};
      const Vec2 q{start.x + n.first, start.y + n.second};
      if (!seen.contains(n) && valid(q)) {
        seen.insert(n);
        queue.push_back(n);
      }
    }
  }
  return false;
}

}  // namespace

void GeometryConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("GeometryConfig: ") + what);
  };
  require(surface_width > 0 && surface_height > 0, "surface must be positive");
  require(tool_half_extents.x > 0 && tool_half_extents.y > 0,
          "tool extents must be positive");
  require(object_half_extent > 0 && obstacle_half_extent > 0 &&
              target_half_extent > 0,
          "body extents must be positive");
  require(d_a > 0, "d_a must be positive");
  require(eps_suc > 0 && eps_fail > 0, "tolerances must be positive");
  require(n_steps > 0, "n_steps must be positive");
  require(slip_sigma >= 0, "slip_sigma must be non-negative");
}

void to_json(nlohmann::json& j, const GeometryConfig& c) {
  j = {{"surface_width", c.surface_width},
       {"surface_height", c.surface_height},
       {"tool_half_extents", c.tool_half_extents},
       {"object_half_extent", c.object_half_extent},
       {"obstacle_half_extent", c.obstacle_half_extent},
       {"target_half_extent", c.target_half_extent},
       {"d_a", c.d_a},
       {"eps_suc", c.eps_suc},
       {"eps_fail", c.eps_fail},
       {"n_steps", c.n_steps},
       {"slip_sigma", c.slip_sigma}};
}

void from_json(const nlohmann::json& j, GeometryConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("surface_width", c.surface_width);
  get("surface_height", c.surface_height);
  get("tool_half_extents", c.tool_half_extents);
  get("object_half_extent", c.object_half_extent);
  get("obstacle_half_extent", c.obstacle_half_extent);
  get("target_half_extent", c.target_half_extent);
  get("d_a", c.d_a);
  get("eps_suc", c.eps_suc);
  get("eps_fail", c.eps_fail);
  get("n_steps", c.n_steps);
  get("slip_sigma", c.slip_sigma);
}

Action::Action(int index) : index_(index) {
  if (index < 1 || index > kNumActions) {
    throw std::invalid_argument("Action index must be in 1..5, got " +
                                std::to_string(index));
  }
}

Vec2 Action::Direction() const { return kDirections[slot()]; }

double Action::Angle() const { return slot() * std::numbers::pi / 4.0; }

std::string_view StatusName(Status s) {
  return kStatusNames[static_cast<int>(s)];
}

Status StatusFromName(std::string_view name) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == name) return static_cast<Status>(i);
  }
  throw std::invalid_argument("unknown status: " + std::string(name));
}

bool BoxesOverlap(const Vec2& a_center, const Vec2& a_half,
                  const Vec2& b_center, const Vec2& b_half) {
  return std::abs(b_center.x - a_center.x) < a_half.x + b_half.x &&
         std::abs(b_center.y - a_center.y) < a_half.y + b_half.y;
}

double BoxGap(const Vec2& a_center, const Vec2& a_half, const Vec2& b_center,
              const Vec2& b_half) {
  const double gx =
      std::max(0.0, std::abs(b_center.x - a_center.x) - a_half.x - b_half.x);
  const double gy =
      std::max(0.0, std::abs(b_center.y - a_center.y) - a_half.y - b_half.y);
  return std::hypot(gx, gy);
}

double PenetrationDepth(const Vec2& a_center, const Vec2& a_half,
                        const Vec2& b_center, const Vec2& b_half,
                        const Vec2& dir) {
  if (!BoxesOverlap(a_center, a_half, b_center, b_half)) return 0.0;
  // Per axis, B escapes once its offset reaches the combined half extent on
  // the side the motion points to.
  auto axis_escape = [](double offset, double extent, double d) {
    if (d > 0.0) return (extent - offset) / d;
    if (d < 0.0) return (extent + offset) / -d;
    return std::numeric_limits<double>::infinity();
  };
  const double sx =
      axis_escape(b_center.x - a_center.x, a_half.x + b_half.x, dir.x);
  const double sy =
      axis_escape(b_center.y - a_center.y, a_half.y + b_half.y, dir.y);
  return std::max(0.0, std::min(sx, sy));
}

Vec2 ToolStartPose(const GeometryConfig& cfg) {
  return {cfg.surface_width / 2.0, cfg.tool_half_extents.y + 0.5};
}

WorldState MakeScenario(std::uint64_t seed, int n_obstacles,
                        const GeometryConfig& cfg) {
  cfg.Validate();
  if (n_obstacles < 0) {
    throw std::invalid_argument("MakeScenario: n_obstacles must be >= 0");
  }
  Rng rng(seed);
  const Vec2 tool = ToolStartPose(cfg);
  const Vec2 th = cfg.tool_half_extents;
  const double ho = cfg.object_half_extent;
  const double ht = cfg.target_half_extent;
  const double hb = cfg.obstacle_half_extent;
  const double front = tool.y + th.y + kScenarioClearance;

  for (int attempt = 0; attempt < kMaxScenarioAttempts; ++attempt) {
    WorldState w;
    w.tool_pose = tool;
    w.object_pose = {rng.Uniform(ho + 1.0, cfg.surface_width - ho - 1.0),
                     rng.Uniform(front + ho, cfg.surface_height - ho - 1.0)};
    w.target_pose = {rng.Uniform(ht, cfg.surface_width - ht),
                     rng.Uniform(front + ht, cfg.surface_height - ht)};
    if (BoxGap(w.object_pose, Square(ho), w.target_pose, Square(ht)) <
        kScenarioClearance) {
      continue;
    }

    auto clear_of_all = [&](const Vec2& c) {
      if (!BoxInside(c, Square(hb), cfg) || c.y - hb < front) return false;
      if (BoxGap(c, Square(hb), w.tool_pose, th) < kScenarioClearance ||
          BoxGap(c, Square(hb), w.object_pose, Square(ho)) <
              kScenarioClearance ||
          BoxGap(c, Square(hb), w.target_pose, Square(ht)) <
              kScenarioClearance) {
        return false;
      }
      for (const Vec2& o : w.obstacles) {
        if (BoxGap(c, Square(hb), o, Square(hb)) < kScenarioClearance) {
          return false;
        }
      }
      return true;
    };

    bool placed = true;
    for (int i = 0; i < n_obstacles && placed; ++i) {
      Vec2 c;
      if (i == 0) {
        const Vec2 seg = w.target_pose - w.object_pose;
        const Vec2 normal = Vec2{-seg.y, seg.x} * (1.0 / seg.Norm());
        c = w.object_pose + seg * rng.Uniform() +
            normal * rng.Uniform(-kBlockingDistance, kBlockingDistance);
      } else {
        c = {rng.Uniform(hb, cfg.surface_width - hb),
             rng.Uniform(front + hb, cfg.surface_height - hb)};
      }
      placed = clear_of_all(c);
      if (placed) w.obstacles.push_back(c);
    }
    if (!placed) continue;

    w.obstacle_initial = w.obstacles;
    w.cumulative_obstacle_displacement.assign(w.obstacles.size(), 0.0);
    if (!ScenarioFeasible(w, cfg)) continue;
    w.rng = Rng(MixSeed(seed, 0x5eed));
    return w;
  }
  throw GenerationFailure("MakeScenario: no feasible scene after " +
                          std::to_string(kMaxScenarioAttempts) + " attempts");
}

bool ScenarioFeasible(const WorldState& world, const GeometryConfig& cfg) {
  return ToolCanReachObject(world, cfg) && ObjectCanReachTarget(world, cfg);
}

Status Termination(const WorldState& w, const GeometryConfig& cfg) {
  if (Distance(w.object_pose, w.target_pose) < cfg.eps_suc) {
    return Status::kSuccess;
  }
  for (double d : w.cumulative_obstacle_displacement) {
    if (d > cfg.eps_fail) return Status::kFailCollision;
  }
  if (!BoxInside(w.tool_pose, cfg.tool_half_extents, cfg) ||
      !BoxInside(w.object_pose, Square(cfg.object_half_extent), cfg)) {
    return Status::kFailOutOfSurface;
  }
  if (w.step_count >= cfg.n_steps) return Status::kFailTimeout;
  return Status::kRunning;
}

StepResult Step(const WorldState& world, Action action,
                const GeometryConfig& cfg) {
  if (IsTerminal(Termination(world, cfg))) {
    throw std::logic_error("Step: world is already terminal");
  }
  WorldState next = world;
  const Vec2 dir = action.Direction();
  next.tool_pose += dir * cfg.d_a;

  // Index 0 is the manipulation object; obstacles and distractors follow.
  std::vector<Body> bodies;
  bodies.push_back({&next.object_pose, Square(cfg.object_half_extent)});
  for (Vec2& o : next.obstacles) {
    bodies.push_back({&o, Square(cfg.obstacle_half_extent)});
  }
  for (Vec2& d : next.distractors) {
    bodies.push_back({&d, Square(cfg.object_half_extent)});
  }

  const double pushed =
      ResolveFromTool(next.tool_pose, cfg.tool_half_extents, bodies, dir);
  if (pushed > 0.0 && cfg.slip_sigma > 0.0) {
    const double lateral = next.rng.Normal() * cfg.slip_sigma * pushed;
    const Vec2 side{-dir.y, dir.x};
    PushBody(bodies, 0, side * lateral);
    // Sideways slip can bring the object back into the tool on diagonals.
    ResolveFromTool(next.tool_pose, cfg.tool_half_extents, bodies, dir);
  }

  for (std::size_t i = 0; i < next.obstacles.size(); ++i) {
    next.cumulative_obstacle_displacement[i] =
        Distance(next.obstacles[i], next.obstacle_initial[i]);
  }
  ++next.step_count;
  const Status status = Termination(next, cfg);
  return {std::move(next), status};
}

}  // namespace pushdqn

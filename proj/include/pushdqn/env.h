#ifndef PUSHDQN_ENV_H_
#define PUSHDQN_ENV_H_

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/geometry.h"
#include "pushdqn/rng.h"

namespace pushdqn {

// Work-surface and body dimensions. All lengths in cm.
struct GeometryConfig {
  double surface_width = 50.0;
  double surface_height = 30.0;
  Vec2 tool_half_extents{3.0, 0.5};
  double object_half_extent = 2.0;
  double obstacle_half_extent = 2.0;
  double target_half_extent = 3.0;
  double d_a = 1.0;
  double eps_suc = 2.0;
  double eps_fail = 0.5;
  int n_steps = 150;
  double slip_sigma = 0.0;

  // Throws std::invalid_argument when an invariant does not hold.
  void Validate() const;
  bool operator==(const GeometryConfig&) const = default;
};

void to_json(nlohmann::json& j, const GeometryConfig& cfg);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, GeometryConfig& cfg);

inline constexpr int kNumActions = 5;

// One of the five motion directions. Index k in 1..5 moves along
// (k - 1) * pi / 4 measured from +X, so 1 = right, 3 = front, 5 = left.
class Action {
 public:
  explicit Action(int index);
  int index() const { return index_; }
  // Zero-based position, convenient for array lookups.
  int slot() const { return index_ - 1; }
  // Unit direction of motion.
  Vec2 Direction() const;
  double Angle() const;
  bool operator==(const Action&) const = default;

 private:
  int index_;
};

enum class Status {
  kRunning,
  kSuccess,
  kFailCollision,
  kFailOutOfSurface,
  kFailTimeout,
};

inline bool IsTerminal(Status s) { return s != Status::kRunning; }
std::string_view StatusName(Status s);
// Inverse of StatusName; throws std::invalid_argument on unknown names.
Status StatusFromName(std::string_view name);

struct WorldState {
  Vec2 tool_pose;
  Vec2 object_pose;
  Vec2 target_pose;
  std::vector<Vec2> obstacles;
  std::vector<Vec2> obstacle_initial;
  std::vector<double> cumulative_obstacle_displacement;
  // Pushable bodies without failure semantics (object-sized, drawn yellow).
  std::vector<Vec2> distractors;
  int step_count = 0;
  Rng rng;

  bool operator==(const WorldState&) const = default;
};

// Raised by MakeScenario when rejection sampling gives up.
class GenerationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxScenarioAttempts = 10000;
// Minimum gap between any two body footprints in a fresh scenario.
inline constexpr double kScenarioClearance = 2.0;
// Obstacle 1 is placed within this distance of the object-target segment.
inline constexpr double kBlockingDistance = 2.0;

// Fixed start pose: lower edge, horizontal midline.
Vec2 ToolStartPose(const GeometryConfig& cfg);

// Random scene, deterministic in (seed, n_obstacles, cfg).
WorldState MakeScenario(std::uint64_t seed, int n_obstacles,
                        const GeometryConfig& cfg);

// Breadth-first reachability on a 1 cm grid: the tool can get behind the
// object and the object can be pushed to the target without touching
// inflated obstacles.
bool ScenarioFeasible(const WorldState& world, const GeometryConfig& cfg);

Status Termination(const WorldState& world, const GeometryConfig& cfg);

struct StepResult {
  WorldState world;
  Status status;
};

// Moves the tool by d_a along the action and resolves pushes. Throws
// std::logic_error if the world is already terminal.
StepResult Step(const WorldState& world, Action action,
                const GeometryConfig& cfg);

// Smallest s >= 0 such that translating box B by s * dir leaves no overlap
// with box A. Zero when the boxes do not overlap. Boxes are axis-aligned,
// given by center and half extents; dir must be a unit vector.
double PenetrationDepth(const Vec2& a_center, const Vec2& a_half,
                        const Vec2& b_center, const Vec2& b_half,
                        const Vec2& dir);

// Strict interior overlap of two axis-aligned boxes.
bool BoxesOverlap(const Vec2& a_center, const Vec2& a_half,
                  const Vec2& b_center, const Vec2& b_half);

// Euclidean gap between two axis-aligned boxes (0 when they touch/overlap).
double BoxGap(const Vec2& a_center, const Vec2& a_half, const Vec2& b_center,
              const Vec2& b_half);

}  // namespace pushdqn

#endif  // PUSHDQN_ENV_H_

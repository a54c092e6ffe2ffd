#include "pushdqn/reward.h"

namespace pushdqn {

void to_json(nlohmann::json& j, const RewardWeights& w) {
  j = {{"alpha1", w.alpha1}, {"alpha2", w.alpha2}, {"alpha3", w.alpha3}};
}

void from_json(const nlohmann::json& j, RewardWeights& w) {
  if (j.contains("alpha1")) j.at("alpha1").get_to(w.alpha1);
  if (j.contains("alpha2")) j.at("alpha2").get_to(w.alpha2);
  if (j.contains("alpha3")) j.at("alpha3").get_to(w.alpha3);
}

double RewardTool(const WorldState& prev, const WorldState& cur, double d_a) {
  return (Distance(prev.tool_pose, prev.object_pose) -
          Distance(cur.tool_pose, cur.object_pose)) /
         d_a;
}

double RewardTarget(const WorldState& prev, const WorldState& cur,
                    double d_a) {
  return (Distance(prev.object_pose, prev.target_pose) -
          Distance(cur.object_pose, cur.target_pose)) /
         d_a;
}

double RewardTerminal(Status status) {
  switch (status) {
    case Status::kRunning:
      return 0.0;
    case Status::kSuccess:
      return 1.0;
    case Status::kFailCollision:
    case Status::kFailOutOfSurface:
    case Status::kFailTimeout:
      return -1.0;
  }
  return 0.0;
}

double RewardTotal(const WorldState& prev, const WorldState& cur,
                   Status status, const RewardWeights& w, double d_a) {
  return w.alpha1 * RewardTool(prev, cur, d_a) +
         w.alpha2 * RewardTarget(prev, cur, d_a) +
         w.alpha3 * RewardTerminal(status);
}

}  // namespace pushdqn

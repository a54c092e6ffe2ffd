#ifndef PUSHDQN_REWARD_H_
#define PUSHDQN_REWARD_H_

#include <nlohmann/json.hpp>

#include "pushdqn/env.h"

namespace pushdqn {

struct RewardWeights {
  double alpha1 = 0.1;  // tool approaches object
  double alpha2 = 0.2;  // object approaches target
  double alpha3 = 1.0;  // terminal outcome
  bool operator==(const RewardWeights&) const = default;
};

void to_json(nlohmann::json& j, const RewardWeights& w);
void from_json(const nlohmann::json& j, RewardWeights& w);

// Decrease of the tool-object distance, in units of d_a.
double RewardTool(const WorldState& prev, const WorldState& cur, double d_a);
// Decrease of the object-target distance, in units of d_a. Uses each state's
// own target pose, so a target moved mid-episode is honored.
double RewardTarget(const WorldState& prev, const WorldState& cur, double d_a);
// +1 on success, -1 on any failure, 0 while running.
double RewardTerminal(Status status);

double RewardTotal(const WorldState& prev, const WorldState& cur,
                   Status status, const RewardWeights& w, double d_a);

}  // namespace pushdqn

#endif  // PUSHDQN_REWARD_H_

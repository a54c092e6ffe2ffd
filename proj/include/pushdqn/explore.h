#ifndef PUSHDQN_EXPLORE_H_
#define PUSHDQN_EXPLORE_H_

#include <array>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/env.h"
#include "pushdqn/rng.h"

namespace pushdqn {

// One obstacle bump: normal along X times skew-normal along Y, both with
// scale sigma (cm) and centered at mu.
struct FieldComponent {
  Vec2 mu;
  double sigma = 3.0;
  double skew_alpha = -3.0;
};

// U(p) = gain / N * sum_i U_i(p); U = 0 without components. The gain is a
// pure amplitude on the mixture (equivalently an inverse softmax
// temperature for the action distribution).
struct PotentialField {
  std::vector<FieldComponent> components;
  double gain = 1.0;
};

struct ExploreConfig {
  double sigma = 3.0;
  double skew_alpha = -3.0;
  double gain = 400.0;
  bool operator==(const ExploreConfig&) const = default;
};

void to_json(nlohmann::json& j, const ExploreConfig& c);
void from_json(const nlohmann::json& j, ExploreConfig& c);

// One component per current obstacle position.
PotentialField BuildField(const WorldState& world, const ExploreConfig& cfg);

double StdNormalPdf(double z);
double StdNormalCdf(double z);
// Skew-normal density (2/sigma) phi(z) Phi(alpha z), z = (y - mu) / sigma.
double SkewNormalPdf(double y, double mu, double sigma, double alpha);

double Potential(const PotentialField& field, const Vec2& p);
Vec2 PotentialGradient(const PotentialField& field, const Vec2& p);

// Integral of the directional derivative v_theta . grad U over the action's
// sector [psi - pi/8, psi + pi/8], v_theta = (cos theta, sin theta).
double SectorDelta(const Vec2& gradient, Action a);
double SectorDelta(const PotentialField& field, const Vec2& p, Action a);

using ActionDistribution = std::array<double, kNumActions>;

// Softmax of -Delta over the five actions (max-subtracted).
ActionDistribution ActionDistributionAt(const PotentialField& field,
                                        const Vec2& p);
ActionDistribution SoftmaxOfNegated(const std::array<double, kNumActions>& d);

// Inverse-CDF draw; consumes exactly one uniform.
Action SampleAction(const ActionDistribution& dist, Rng& rng);
Action SampleAction(const PotentialField& field, const Vec2& p, Rng& rng);
// Uniform baseline over the five actions; consumes exactly one uniform.
Action SampleUniformAction(Rng& rng);

}  // namespace pushdqn

#endif  // PUSHDQN_EXPLORE_H_

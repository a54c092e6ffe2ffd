#include "pushdqn/explore.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pushdqn {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1 / sqrt(2 pi)
constexpr double kEighthTurn = std::numbers::pi / 8.0;

struct ComponentTerms {
  double value;
  double d_dx;
  double d_dy;
};

// Value and partial derivatives of one factorized component.
ComponentTerms Evaluate(const FieldComponent& c, const Vec2& p) {
  const double s = c.sigma;
  const double zx = (p.x - c.mu.x) / s;
  const double zy = (p.y - c.mu.y) / s;
  const double fx = StdNormalPdf(zx) / s;
  const double dfx = -zx / s * fx;
  const double pdf_y = StdNormalPdf(zy);
  const double cdf_y = StdNormalCdf(c.skew_alpha * zy);
  const double gy = 2.0 / s * pdf_y * cdf_y;
  const double dgy = 2.0 / (s * s) *
                     (-zy * pdf_y * cdf_y +
                      pdf_y * c.skew_alpha * StdNormalPdf(c.skew_alpha * zy));
  return {fx * gy, dfx * gy, fx * dgy};
}

}  // namespace

void to_json(nlohmann::json& j, const ExploreConfig& c) {
  j = {{"sigma", c.sigma}, {"skew_alpha", c.skew_alpha}, {"gain", c.gain}};
}

void from_json(const nlohmann::json& j, ExploreConfig& c) {
  if (j.contains("sigma")) j.at("sigma").get_to(c.sigma);
  if (j.contains("skew_alpha")) j.at("skew_alpha").get_to(c.skew_alpha);
  if (j.contains("gain")) j.at("gain").get_to(c.gain);
}

PotentialField BuildField(const WorldState& world, const ExploreConfig& cfg) {
  PotentialField field;
  field.gain = cfg.gain;
  field.components.reserve(world.obstacles.size());
  for (const Vec2& o : world.obstacles) {
    field.components.push_back({o, cfg.sigma, cfg.skew_alpha});
  }
  return field;
}

double StdNormalPdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double StdNormalCdf(double z) {
  return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

double SkewNormalPdf(double y, double mu, double sigma, double alpha) {
  const double z = (y - mu) / sigma;
  return 2.0 / sigma * StdNormalPdf(z) * StdNormalCdf(alpha * z);
}

double Potential(const PotentialField& field, const Vec2& p) {
  if (field.components.empty()) return 0.0;
  double sum = 0.0;
  for (const FieldComponent& c : field.components) sum += Evaluate(c, p).value;
  return field.gain * sum / static_cast<double>(field.components.size());
}

Vec2 PotentialGradient(const PotentialField& field, const Vec2& p) {
  if (field.components.empty()) return {};
  Vec2 g;
  for (const FieldComponent& c : field.components) {
    const ComponentTerms t = Evaluate(c, p);
    g.x += t.d_dx;
    g.y += t.d_dy;
  }
  return g * (field.gain / static_cast<double>(field.components.size()));
}

double SectorDelta(const Vec2& gradient, Action a) {
  const double lo = a.Angle() - kEighthTurn;
  const double hi = a.Angle() + kEighthTurn;
  // Antiderivative of cos(t) gx + sin(t) gy is sin(t) gx - cos(t) gy.
  return gradient.x * (std::sin(hi) - std::sin(lo)) +
         gradient.y * (std::cos(lo) - std::cos(hi));
}

double SectorDelta(const PotentialField& field, const Vec2& p, Action a) {
  return SectorDelta(PotentialGradient(field, p), a);
}

ActionDistribution SoftmaxOfNegated(const std::array<double, kNumActions>& d) {
  const double lowest = *std::min_element(d.begin(), d.end());
  ActionDistribution probs{};
  double total = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    probs[i] = std::exp(-(d[i] - lowest));
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

ActionDistribution ActionDistributionAt(const PotentialField& field,
                                        const Vec2& p) {
  const Vec2 g = PotentialGradient(field, p);
  std::array<double, kNumActions> delta{};
  for (int k = 1; k <= kNumActions; ++k) {
    delta[k - 1] = SectorDelta(g, Action(k));
  }
  return SoftmaxOfNegated(delta);
}

Action SampleAction(const ActionDistribution& dist, Rng& rng) {
  const double u = rng.Uniform();
  double cumulative = 0.0;
  for (int i = 0; i < kNumActions - 1; ++i) {
    cumulative += dist[i];
    if (u < cumulative) return Action(i + 1);
  }
  return Action(kNumActions);
}

Action SampleAction(const PotentialField& field, const Vec2& p, Rng& rng) {
  return SampleAction(ActionDistributionAt(field, p), rng);
}

Action SampleUniformAction(Rng& rng) {
  return Action(1 + static_cast<int>(rng.Uniform() * kNumActions));
}

}  // namespace pushdqn

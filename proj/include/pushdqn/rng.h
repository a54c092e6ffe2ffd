#ifndef PUSHDQN_RNG_H_
#define PUSHDQN_RNG_H_

#include <cstdint>
#include <random>
#include <string>

namespace pushdqn {

// Seedable generator with a serializable state. Draws are computed from raw
// engine output so that a restored state reproduces the exact stream; no
// distribution object carries hidden cached values.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller; consumes two uniforms per call.
  double Normal();
  // Uniform integer in [0, n).
  std::uint64_t UniformInt(std::uint64_t n);
  bool Bernoulli(double p) { return Uniform() < p; }

  std::string State() const;
  void SetState(const std::string& state);

  bool operator==(const Rng& o) const { return engine_ == o.engine_; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; derives independent stream seeds from (seed, index).
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t index);

}  // namespace pushdqn

#endif  // PUSHDQN_RNG_H_

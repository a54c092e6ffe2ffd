#ifndef PUSHDQN_DQN_H_
#define PUSHDQN_DQN_H_

#include <cstdint>
#include <span>
#include <vector>

#include "pushdqn/network.h"
#include "pushdqn/replay.h"

namespace pushdqn {

inline constexpr double kSoftUpdateRate = 0.001;

// Primary and target parameter sets of one architecture. The target is
// accumulated in double precision by SoftUpdate; `target` holds its rounded
// copy used for inference.
template <typename T>
struct NetworkPair {
  explicit NetworkPair(const Architecture& arch)
      : primary(arch), target(arch) {
    SyncMasterFromTarget();
  }

  QNetwork<T> primary;
  QNetwork<T> target;
  std::vector<std::vector<double>> target_master;

  // Makes the target an exact copy of the primary.
  void HardSync();
  // Re-derives the double accumulator from the current target values.
  void SyncMasterFromTarget();
};

// theta_t <- (1 - rate) theta_t + rate theta_p, elementwise.
template <typename T>
void SoftUpdate(NetworkPair<T>& pair, double rate = kSoftUpdateRate);

// Batched transition data in network layout.
template <typename T>
struct TransitionBatch {
  Tensor<T> obs;       // [B, C, H, W]
  Tensor<T> next_obs;  // [B, C, H, W]
  std::vector<int> action_slots;  // 0-based
  std::vector<double> rewards;
  std::vector<bool> terminal;

  int size() const { return static_cast<int>(rewards.size()); }
};

template <typename T>
TransitionBatch<T> MakeBatch(std::span<const Experience> experiences);

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  ParamList<T> grads;  // w.r.t. the primary parameters
  std::vector<double> td_errors;
};

// Mean over the batch of (y - Q(x, a; primary))^2 where
// y = r + gamma * max_a' Q(x', a'; target), or y = r for terminal
// transitions. The target term is a constant: no gradient flows through it.
template <typename T>
LossAndGrads<T> DqnLossAndGrads(const NetworkPair<T>& pair,
                                const TransitionBatch<T>& batch, double gamma);
template <typename T>
LossAndGrads<T> DqnLossAndGrads(const NetworkPair<T>& pair,
                                std::span<const Experience> batch,
                                double gamma);

template <typename T>
struct AdamState {
  ParamList<T> m;
  ParamList<T> v;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double learning_rate = 1e-4;

  static AdamState For(const ParamList<T>& params);
};

// Bias-corrected Adam update in place; increments step_count.
template <typename T>
void AdamStep(ParamList<T>& params, const ParamList<T>& grads,
              AdamState<T>& state);

// Rescales grads so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
template <typename T>
double ClipGlobalNorm(ParamList<T>& grads, double max_norm);

// Index (0-based) of the largest Q-value in row b of a [B, 5] tensor; ties
// resolve to the lowest index.
template <typename T>
int ArgmaxRow(const Tensor<T>& q, int b);

}  // namespace pushdqn

#endif  // PUSHDQN_DQN_H_

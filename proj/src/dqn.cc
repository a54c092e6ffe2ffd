#include "pushdqn/dqn.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pushdqn {

namespace {

template <typename T>
void RequireSameShapes(const ParamList<T>& a, const ParamList<T>& b,
                       const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": parameter count mismatch");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) {
      throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                  ShapeString(a[i].shape()) + " vs " +
                                  ShapeString(b[i].shape()));
    }
  }
}

}  // namespace

template <typename T>
void NetworkPair<T>::HardSync() {
  target.params() = primary.params();
  SyncMasterFromTarget();
}

template <typename T>
void NetworkPair<T>::SyncMasterFromTarget() {
  target_master.clear();
  for (const auto& p : target.params()) {
    target_master.emplace_back(p.values().begin(), p.values().end());
  }
}

template <typename T>
void SoftUpdate(NetworkPair<T>& pair, double rate) {
  RequireSameShapes(pair.target.params(), pair.primary.params(), "SoftUpdate");
  const double keep = 1.0 - rate;
  auto& target = pair.target.params();
  const auto& primary = pair.primary.params();
  for (std::size_t i = 0; i < target.size(); ++i) {
    std::vector<double>& master = pair.target_master[i];
    const T* p = primary[i].data();
    T* t = target[i].data();
    for (std::size_t j = 0; j < master.size(); ++j) {
      master[j] = keep * master[j] + rate * static_cast<double>(p[j]);
      t[j] = static_cast<T>(master[j]);
    }
  }
}

template <typename T>
TransitionBatch<T> MakeBatch(std::span<const Experience> experiences) {
  if (experiences.empty()) throw std::invalid_argument("MakeBatch: empty batch");
  const int nb = static_cast<int>(experiences.size());
  const int h = experiences[0].obs.height;
  const int w = experiences[0].obs.width;
  const std::size_t plane = 3 * static_cast<std::size_t>(h) * w;
  TransitionBatch<T> batch;
  batch.obs = Tensor<T>({nb, 3, h, w});
  batch.next_obs = Tensor<T>({nb, 3, h, w});
  std::vector<float> scratch(plane);
  for (int b = 0; b < nb; ++b) {
    const Experience& e = experiences[b];
    if (e.obs.width != w || e.obs.height != h || e.next_obs.width != w ||
        e.next_obs.height != h) {
      throw std::invalid_argument("MakeBatch: mixed observation sizes");
    }
    NormalizeInto(e.obs, scratch.data());
    std::copy(scratch.begin(), scratch.end(), batch.obs.data() + b * plane);
    NormalizeInto(e.next_obs, scratch.data());
    std::copy(scratch.begin(), scratch.end(), batch.next_obs.data() + b * plane);
    batch.action_slots.push_back(e.action.slot());
    batch.rewards.push_back(e.reward);
    batch.terminal.push_back(e.terminal);
  }
  return batch;
}

template <typename T>
LossAndGrads<T> DqnLossAndGrads(const NetworkPair<T>& pair,
                                const TransitionBatch<T>& batch,
                                double gamma) {
  const int nb = batch.size();
  if (nb == 0) throw std::invalid_argument("DqnLossAndGrads: empty batch");
  const Tensor<T> next_q = pair.target.Forward(batch.next_obs);
  ForwardTrace<T> trace;
  const Tensor<T> q = pair.primary.Forward(batch.obs, &trace);

  LossAndGrads<T> result;
  Tensor<T> grad_out({nb, 5}, T{0});
  double loss = 0.0;
  for (int b = 0; b < nb; ++b) {
    double y = batch.rewards[b];
    if (!batch.terminal[b]) {
      y += gamma * static_cast<double>(next_q[b * 5 + ArgmaxRow(next_q, b)]);
    }
    const int a = batch.action_slots[b];
    const double td = y - static_cast<double>(q[b * 5 + a]);
    result.td_errors.push_back(td);
    loss += td * td;
    grad_out[b * 5 + a] = static_cast<T>(-2.0 * td / nb);
  }
  result.loss = loss / nb;
  result.grads = pair.primary.Backward(trace, grad_out);
  return result;
}

template <typename T>
LossAndGrads<T> DqnLossAndGrads(const NetworkPair<T>& pair,
                                std::span<const Experience> batch,
                                double gamma) {
  return DqnLossAndGrads(pair, MakeBatch<T>(batch), gamma);
}

template <typename T>
AdamState<T> AdamState<T>::For(const ParamList<T>& params) {
  AdamState<T> s;
  s.m = ZerosLike(params);
  s.v = ZerosLike(params);
  return s;
}

template <typename T>
void AdamStep(ParamList<T>& params, const ParamList<T>& grads,
              AdamState<T>& state) {
  RequireSameShapes(params, grads, "AdamStep");
  RequireSameShapes(params, state.m, "AdamStep");
  RequireSameShapes(params, state.v, "AdamStep");
  ++state.step_count;
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T one_minus_b1 = static_cast<T>(1.0 - state.beta1);
  const T one_minus_b2 = static_cast<T>(1.0 - state.beta2);
  const T bias1 = static_cast<T>(
      1.0 - std::pow(state.beta1, static_cast<double>(state.step_count)));
  const T bias2 = static_cast<T>(
      1.0 - std::pow(state.beta2, static_cast<double>(state.step_count)));
  const T lr = static_cast<T>(state.learning_rate);
  const T eps = static_cast<T>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].data();
    const T* g = grads[i].data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const std::size_t n = params[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + one_minus_b1 * g[j];
      v[j] = b2 * v[j] + one_minus_b2 * g[j] * g[j];
      const T m_hat = m[j] / bias1;
      const T v_hat = v[j] / bias2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
double ClipGlobalNorm(ParamList<T>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (T v : g.values()) sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& g : grads) {
      for (T& v : g.values()) v *= scale;
    }
  }
  return norm;
}

template <typename T>
int ArgmaxRow(const Tensor<T>& q, int b) {
  const int width = q.dim(1);
  const T* row = q.data() + static_cast<std::size_t>(b) * width;
  return static_cast<int>(std::max_element(row, row + width) - row);
}

#define PUSHDQN_INSTANTIATE(T)                                                 \
  template struct NetworkPair<T>;                                              \
  template void SoftUpdate(NetworkPair<T>&, double);                           \
  template TransitionBatch<T> MakeBatch<T>(std::span<const Experience>);       \
  template LossAndGrads<T> DqnLossAndGrads(const NetworkPair<T>&,              \
                                           const TransitionBatch<T>&, double); \
  template LossAndGrads<T> DqnLossAndGrads(const NetworkPair<T>&,              \
                                           std::span<const Experience>,        \
                                           double);                            \
  template struct AdamState<T>;                                                \
  template void AdamStep(ParamList<T>&, const ParamList<T>&, AdamState<T>&);   \
  template double ClipGlobalNorm(ParamList<T>&, double);                       \
  template int ArgmaxRow(const Tensor<T>&, int);

PUSHDQN_INSTANTIATE(float)
PUSHDQN_INSTANTIATE(double)

#undef PUSHDQN_INSTANTIATE

}  // namespace pushdqn

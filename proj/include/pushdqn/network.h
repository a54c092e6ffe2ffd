#ifndef PUSHDQN_NETWORK_H_
#define PUSHDQN_NETWORK_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/rng.h"
#include "pushdqn/tensor.h"

namespace pushdqn {

enum class LayerKind { kConv, kRelu, kMaxPool, kFlatten, kDense };

// Conv layers are 3x3, stride 1, zero padding 1. MaxPool is 2x2, stride 2.
// `units` is the output channel count (Conv) or feature count (Dense).
struct LayerSpec {
  LayerKind kind;
  int units = 0;

  static LayerSpec Conv(int channels) { return {LayerKind::kConv, channels}; }
  static LayerSpec Relu() { return {LayerKind::kRelu, 0}; }
  static LayerSpec MaxPool() { return {LayerKind::kMaxPool, 0}; }
  static LayerSpec Flatten() { return {LayerKind::kFlatten, 0}; }
  static LayerSpec Dense(int features) { return {LayerKind::kDense, features}; }

  bool HasParams() const {
    return kind == LayerKind::kConv || kind == LayerKind::kDense;
  }
  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  int in_channels = 3;
  int in_height = 64;
  int in_width = 64;
  std::vector<LayerSpec> layers;

  // Six 3x3 conv layers (8, 8, 16, 16, 32, 32) with ReLU, max pooling after
  // conv 1, 2, 4 and 6, then Dense 256 + ReLU and Dense 5.
  static Architecture Default(int resolution);

  // Per-sample output shape of every layer; throws std::invalid_argument
  // when the stack is not shape-consistent or does not end in 5 outputs.
  std::vector<std::vector<int>> LayerOutputShapes() const;
  // Weight and bias shapes, in declaration order.
  std::vector<std::vector<int>> ParamShapes() const;
  std::size_t ParameterCount() const;
  // Versioned token describing the exact stack, e.g. "qnet-v1:3x64x64:c8,r,...".
  std::string Id() const;

  bool operator==(const Architecture&) const = default;
};

void to_json(nlohmann::json& j, const Architecture& a);
void from_json(const nlohmann::json& j, Architecture& a);

template <typename T>
using ParamList = std::vector<Tensor<T>>;

// Activations recorded by a forward pass for the backward pass.
template <typename T>
struct ForwardTrace {
  int batch = 0;
  // inputs[l] is the input of layer l; inputs.back() is the network output.
  std::vector<std::vector<T>> inputs;
  // Flat argmax positions of each pooling layer (empty for other layers).
  std::vector<std::vector<std::int32_t>> pool_argmax;
};

// Feed-forward Q-network over a fixed layer stack. Parameters are stored as
// [weight, bias] pairs per parametrized layer: conv weights [out, in, 3, 3],
// dense weights [out, in].
template <typename T>
class QNetwork {
 public:
  explicit QNetwork(Architecture arch);

  const Architecture& arch() const { return arch_; }
  ParamList<T>& params() { return params_; }
  const ParamList<T>& params() const { return params_; }

  // Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  void InitializeUniform(Rng& rng);

  // batch: [B, C, H, W] matching the architecture input. Returns [B, 5].
  Tensor<T> Forward(const Tensor<T>& batch) const;
  Tensor<T> Forward(const Tensor<T>& batch, ForwardTrace<T>* trace) const;

  // Gradients of sum_b <grad_output[b], output[b]> w.r.t. the parameters.
  ParamList<T> Backward(const ForwardTrace<T>& trace,
                        const Tensor<T>& grad_output) const;

 private:
  Architecture arch_;
  std::vector<std::vector<int>> shapes_;  // per-layer output shapes
  ParamList<T> params_;
  std::vector<int> param_index_;  // layer -> index of its weight, or -1
};

// Zero-filled tensors with the same shapes.
template <typename T>
ParamList<T> ZerosLike(const ParamList<T>& params);

}  // namespace pushdqn

#endif  // PUSHDQN_NETWORK_H_

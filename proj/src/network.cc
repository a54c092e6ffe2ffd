#include "pushdqn/network.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pushdqn {

namespace {

constexpr int kNumOutputs = 5;

template <typename T>
T Dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void Axpy(T alpha, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Unrolls 3x3 zero-padded patches: col[(c*3+ky)*3+kx][y*W+x] =
// in[c][y+ky-1][x+kx-1].
template <typename T>
void Im2Col(const T* in, int channels, int h, int w, T* col) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + ((c * 3 + ky) * 3 + kx) * n;
        for (int y = 0; y < h; ++y) {
          T* drow = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) {
            std::fill(drow, drow + w, T{0});
            continue;
          }
          const T* srow = in + (static_cast<std::size_t>(c) * h + sy) * w;
          if (kx == 0) {
            drow[0] = 0;
            std::copy(srow, srow + w - 1, drow + 1);
          } else if (kx == 1) {
            std::copy(srow, srow + w, drow);
          } else {
            std::copy(srow + 1, srow + w, drow);
            drow[w - 1] = 0;
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col, accumulating into `in`.
template <typename T>
void Col2ImAdd(const T* col, int channels, int h, int w, T* in) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + ((c * 3 + ky) * 3 + kx) * n;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* srow = src + static_cast<std::size_t>(y) * w;
          T* drow = in + (static_cast<std::size_t>(c) * h + sy) * w;
          if (kx == 0) {
            for (int x = 1; x < w; ++x) drow[x - 1] += srow[x];
          } else if (kx == 1) {
            for (int x = 0; x < w; ++x) drow[x] += srow[x];
          } else {
            for (int x = 0; x + 1 < w; ++x) drow[x + 1] += srow[x];
          }
        }
      }
    }
  }
}

std::size_t Count(const std::vector<int>& shape) {
  return Tensor<float>::CountOf(shape);
}

char KindCode(LayerKind k) {
  switch (k) {
    case LayerKind::kConv:
      return 'c';
    case LayerKind::kRelu:
      return 'r';
    case LayerKind::kMaxPool:
      return 'p';
    case LayerKind::kFlatten:
      return 'f';
    case LayerKind::kDense:
      return 'd';
  }
  return '?';
}

LayerKind KindFromCode(char c) {
  switch (c) {
    case 'c':
      return LayerKind::kConv;
    case 'r':
      return LayerKind::kRelu;
    case 'p':
      return LayerKind::kMaxPool;
    case 'f':
      return LayerKind::kFlatten;
    case 'd':
      return LayerKind::kDense;
  }
  throw std::invalid_argument(std::string("unknown layer code ") + c);
}

}  // namespace

Architecture Architecture::Default(int resolution) {
  Architecture a;
  a.in_channels = 3;
  a.in_height = a.in_width = resolution;
  using L = LayerSpec;
  a.layers = {L::Conv(8),  L::Relu(), L::MaxPool(), L::Conv(8),   L::Relu(),
              L::MaxPool(), L::Conv(16), L::Relu(),    L::Conv(16),  L::Relu(),
              L::MaxPool(), L::Conv(32), L::Relu(),    L::Conv(32),  L::Relu(),
              L::MaxPool(), L::Flatten(), L::Dense(256), L::Relu(),
              L::Dense(kNumOutputs)};
  return a;
}

std::vector<std::vector<int>> Architecture::LayerOutputShapes() const {
  if (in_channels <= 0 || in_height <= 0 || in_width <= 0) {
    throw std::invalid_argument("Architecture: input dimensions must be > 0");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> cur{in_channels, in_height, in_width};
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::kConv:
        if (cur.size() != 3 || l.units <= 0) {
          throw std::invalid_argument("Architecture: conv needs [C,H,W] input");
        }
        cur = {l.units, cur[1], cur[2]};
        break;
      case LayerKind::kRelu:
        break;
      case LayerKind::kMaxPool:
        if (cur.size() != 3 || cur[1] % 2 || cur[2] % 2) {
          throw std::invalid_argument(
              "Architecture: max pooling needs even spatial dims, got " +
              ShapeString(cur));
        }
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::kFlatten:
        cur = {static_cast<int>(Count(cur))};
        break;
      case LayerKind::kDense:
        if (cur.size() != 1 || l.units <= 0) {
          throw std::invalid_argument("Architecture: dense needs flat input");
        }
        cur = {l.units};
        break;
    }
    out.push_back(cur);
  }
  if (cur != std::vector<int>{kNumOutputs}) {
    throw std::invalid_argument("Architecture: must end in 5 outputs, got " +
                                ShapeString(cur));
  }
  return out;
}

std::vector<std::vector<int>> Architecture::ParamShapes() const {
  const auto shapes = LayerOutputShapes();
  std::vector<std::vector<int>> params;
  std::vector<int> in{in_channels, in_height, in_width};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::kConv) {
      params.push_back({layers[i].units, in[0], 3, 3});
      params.push_back({layers[i].units});
    } else if (layers[i].kind == LayerKind::kDense) {
      params.push_back({layers[i].units, in[0]});
      params.push_back({layers[i].units});
    }
    in = shapes[i];
  }
  return params;
}

std::size_t Architecture::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& s : ParamShapes()) n += Count(s);
  return n;
}

std::string Architecture::Id() const {
  std::string id = "qnet-v1:" + std::to_string(in_channels) + "x" +
                   std::to_string(in_height) + "x" + std::to_string(in_width) +
                   ":";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) id += ",";
    id += KindCode(layers[i].kind);
    if (layers[i].HasParams()) id += std::to_string(layers[i].units);
  }
  return id;
}

void to_json(nlohmann::json& j, const Architecture& a) {
  std::string stack;
  for (const LayerSpec& l : a.layers) {
    if (!stack.empty()) stack += ",";
    stack += KindCode(l.kind);
    if (l.HasParams()) stack += std::to_string(l.units);
  }
  j = {{"in_channels", a.in_channels},
       {"in_height", a.in_height},
       {"in_width", a.in_width},
       {"layers", stack}};
}

void from_json(const nlohmann::json& j, Architecture& a) {
  a.in_channels = j.at("in_channels").get<int>();
  a.in_height = j.at("in_height").get<int>();
  a.in_width = j.at("in_width").get<int>();
  a.layers.clear();
  const std::string stack = j.at("layers").get<std::string>();
  std::size_t pos = 0;
  while (pos < stack.size()) {
    std::size_t end = stack.find(',', pos);
    if (end == std::string::npos) end = stack.size();
    const std::string tok = stack.substr(pos, end - pos);
    if (tok.empty()) throw std::invalid_argument("empty layer token");
    LayerSpec l{KindFromCode(tok[0]), 0};
    if (l.HasParams()) l.units = std::stoi(tok.substr(1));
    a.layers.push_back(l);
    pos = end + 1;
  }
}

template <typename T>
ParamList<T> ZerosLike(const ParamList<T>& params) {
  ParamList<T> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.shape());
  return out;
}

template <typename T>
QNetwork<T>::QNetwork(Architecture arch)
    : arch_(std::move(arch)), shapes_(arch_.LayerOutputShapes()) {
  for (const auto& s : arch_.ParamShapes()) params_.emplace_back(s);
  int next = 0;
  for (const LayerSpec& l : arch_.layers) {
    param_index_.push_back(l.HasParams() ? next : -1);
    if (l.HasParams()) next += 2;
  }
}

template <typename T>
void QNetwork<T>::InitializeUniform(Rng& rng) {
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    const auto& shape = params_[i].shape();
    double fan_in, fan_out;
    if (shape.size() == 4) {
      fan_in = shape[1] * 9.0;
      fan_out = shape[0] * 9.0;
    } else {
      fan_in = shape[1];
      fan_out = shape[0];
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& w : params_[i].values()) {
      w = static_cast<T>(rng.Uniform(-limit, limit));
    }
    params_[i + 1].Fill(T{0});
  }
}

template <typename T>
Tensor<T> QNetwork<T>::Forward(const Tensor<T>& batch) const {
  return Forward(batch, nullptr);
}

template <typename T>
Tensor<T> QNetwork<T>::Forward(const Tensor<T>& batch,
                               ForwardTrace<T>* trace) const {
  const std::vector<int> expected{arch_.in_channels, arch_.in_height,
                                  arch_.in_width};
  if (batch.rank() != 4 ||
      !std::equal(expected.begin(), expected.end(), batch.shape().begin() + 1)) {
    throw std::invalid_argument("QNetwork::Forward: expected [B," +
                                ShapeString(expected).substr(1) + " input, got " +
                                ShapeString(batch.shape()));
  }
  const int nb = batch.dim(0);
  std::vector<T> cur(batch.values().begin(), batch.values().end());
  std::vector<int> in_shape = expected;
  if (trace) {
    trace->batch = nb;
    trace->inputs.assign(1, {});
    trace->pool_argmax.assign(arch_.layers.size(), {});
  }
  std::vector<T> col;

  for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
    const LayerSpec& layer = arch_.layers[l];
    const std::vector<int>& out_shape = shapes_[l];
    const std::size_t in_size = Count(in_shape);
    const std::size_t out_size = Count(out_shape);
    std::vector<T> out(out_size * nb);

    switch (layer.kind) {
      case LayerKind::kConv: {
        const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
        const std::size_t n = static_cast<std::size_t>(h) * w;
        const std::size_t k = static_cast<std::size_t>(c) * 9;
        const T* weight = params_[param_index_[l]].data();
        const T* bias = params_[param_index_[l] + 1].data();
        col.resize(k * n);
        for (int b = 0; b < nb; ++b) {
          Im2Col(cur.data() + b * in_size, c, h, w, col.data());
          T* ob = out.data() + b * out_size;
          for (int o = 0; o < layer.units; ++o) {
            T* row = ob + o * n;
            std::fill(row, row + n, bias[o]);
            for (std::size_t kk = 0; kk < k; ++kk) {
              Axpy(weight[o * k + kk], col.data() + kk * n, row, n);
            }
          }
        }
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i] = cur[i] > T{0} ? cur[i] : T{0};
        }
        break;
      case LayerKind::kMaxPool: {
        const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
        const int oh = h / 2, ow = w / 2;
        std::vector<std::int32_t> argmax(out.size());
        for (int b = 0; b < nb; ++b) {
          const T* ib = cur.data() + b * in_size;
          for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < oh; ++y) {
              for (int x = 0; x < ow; ++x) {
                std::int32_t best = (ch * h + 2 * y) * w + 2 * x;
                for (int dy = 0; dy < 2; ++dy) {
                  for (int dx = 0; dx < 2; ++dx) {
                    const std::int32_t idx = (ch * h + 2 * y + dy) * w + 2 * x + dx;
                    if (ib[idx] > ib[best]) best = idx;
                  }
                }
                const std::size_t o =
                    b * out_size + (static_cast<std::size_t>(ch) * oh + y) * ow + x;
                out[o] = ib[best];
                argmax[o] = best;
              }
            }
          }
        }
        if (trace) trace->pool_argmax[l] = std::move(argmax);
        break;
      }
      case LayerKind::kFlatten:
        out = cur;
        break;
      case LayerKind::kDense: {
        const std::size_t fin = in_size;
        const T* weight = params_[param_index_[l]].data();
        const T* bias = params_[param_index_[l] + 1].data();
        for (int b = 0; b < nb; ++b) {
          const T* x = cur.data() + b * fin;
          for (int o = 0; o < layer.units; ++o) {
            out[b * out_size + o] = bias[o] + Dot(weight + o * fin, x, fin);
          }
        }
        break;
      }
    }
    if (trace) {
      trace->inputs.back() = std::move(cur);
      trace->inputs.push_back(out);
    }
    cur = std::move(out);
    in_shape = out_shape;
  }
  std::vector<int> result_shape{nb, kNumOutputs};
  return Tensor<T>(std::move(result_shape), std::move(cur));
}

template <typename T>
ParamList<T> QNetwork<T>::Backward(const ForwardTrace<T>& trace,
                                   const Tensor<T>& grad_output) const {
  const int nb = trace.batch;
  if (grad_output.rank() != 2 || grad_output.dim(0) != nb ||
      grad_output.dim(1) != kNumOutputs) {
    throw std::invalid_argument("QNetwork::Backward: bad gradient shape " +
                                ShapeString(grad_output.shape()));
  }
  if (trace.inputs.size() != arch_.layers.size() + 1) {
    throw std::invalid_argument("QNetwork::Backward: trace does not match");
  }
  ParamList<T> grads = ZerosLike(params_);
  std::vector<T> g(grad_output.values().begin(), grad_output.values().end());
  std::vector<T> col, dcol;

  for (std::size_t li = arch_.layers.size(); li-- > 0;) {
    const LayerSpec& layer = arch_.layers[li];
    const std::vector<int> in_shape =
        li == 0 ? std::vector<int>{arch_.in_channels, arch_.in_height,
                                   arch_.in_width}
                : shapes_[li - 1];
    const std::size_t in_size = Count(in_shape);
    const std::size_t out_size = Count(shapes_[li]);
    const std::vector<T>& input = trace.inputs[li];
    const bool need_input_grad = li > 0;
    std::vector<T> gin;
    if (need_input_grad) gin.assign(in_size * nb, T{0});

    switch (layer.kind) {
      case LayerKind::kConv: {
        const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
        const std::size_t n = static_cast<std::size_t>(h) * w;
        const std::size_t k = static_cast<std::size_t>(c) * 9;
        const T* weight = params_[param_index_[li]].data();
        T* dw = grads[param_index_[li]].data();
        T* db = grads[param_index_[li] + 1].data();
        col.resize(k * n);
        if (need_input_grad) dcol.resize(k * n);
        for (int b = 0; b < nb; ++b) {
          Im2Col(input.data() + b * in_size, c, h, w, col.data());
          const T* gb = g.data() + b * out_size;
          if (need_input_grad) std::fill(dcol.begin(), dcol.end(), T{0});
          for (int o = 0; o < layer.units; ++o) {
            const T* go = gb + o * n;
            T sum = 0;
            for (std::size_t i = 0; i < n; ++i) sum += go[i];
            db[o] += sum;
            for (std::size_t kk = 0; kk < k; ++kk) {
              dw[o * k + kk] += Dot(go, col.data() + kk * n, n);
              if (need_input_grad) {
                Axpy(weight[o * k + kk], go, dcol.data() + kk * n, n);
              }
            }
          }
          if (need_input_grad) {
            Col2ImAdd(dcol.data(), c, h, w, gin.data() + b * in_size);
          }
        }
        break;
      }
      case LayerKind::kRelu:
        if (need_input_grad) {
          for (std::size_t i = 0; i < gin.size(); ++i) {
            gin[i] = input[i] > T{0} ? g[i] : T{0};
          }
        }
        break;
      case LayerKind::kMaxPool:
        if (need_input_grad) {
          const auto& argmax = trace.pool_argmax[li];
          for (int b = 0; b < nb; ++b) {
            for (std::size_t o = 0; o < out_size; ++o) {
              const std::size_t idx = b * out_size + o;
              gin[b * in_size + argmax[idx]] += g[idx];
            }
          }
        }
        break;
      case LayerKind::kFlatten:
        if (need_input_grad) gin = g;
        break;
      case LayerKind::kDense: {
        const std::size_t fin = in_size;
        const T* weight = params_[param_index_[li]].data();
        T* dw = grads[param_index_[li]].data();
        T* db = grads[param_index_[li] + 1].data();
        for (int b = 0; b < nb; ++b) {
          const T* x = input.data() + b * fin;
          for (int o = 0; o < layer.units; ++o) {
            const T go = g[b * out_size + o];
            if (go == T{0}) continue;
            db[o] += go;
            Axpy(go, x, dw + o * fin, fin);
            if (need_input_grad) {
              Axpy(go, weight + o * fin, gin.data() + b * fin, fin);
            }
          }
        }
        break;
      }
    }
    g = std::move(gin);
  }
  return grads;
}

template class QNetwork<float>;
template class QNetwork<double>;
template ParamList<float> ZerosLike(const ParamList<float>&);
template ParamList<double> ZerosLike(const ParamList<double>&);

}  // namespace pushdqn

#include "pushdqn/network.h"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

namespace pushdqn {
namespace {

Architecture Small() {
  Architecture a;
  a.in_channels = 2;
  a.in_height = 4;
  a.in_width = 4;
  a.layers = {LayerSpec::Conv(3), LayerSpec::Relu(), LayerSpec::MaxPool(),
              LayerSpec::Conv(2), LayerSpec::Relu(), LayerSpec::Flatten(),
              LayerSpec::Dense(6), LayerSpec::Relu(), LayerSpec::Dense(5)};
  return a;
}

template <typename T>
Tensor<T> RandomInput(const Architecture& a, int batch, Rng& rng) {
  Tensor<T> x({batch, a.in_channels, a.in_height, a.in_width});
  for (T& v : x.values()) v = static_cast<T>(rng.Uniform());
  return x;
}

// Straightforward loops, written independently of the library kernels.
std::vector<double> NaiveConv(const std::vector<double>& in, int c_in, int h,
                              int w, const Tensor<double>& weight,
                              const Tensor<double>& bias) {
  const int c_out = weight.dim(0);
  std::vector<double> out(static_cast<std::size_t>(c_out) * h * w);
  for (int o = 0; o < c_out; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = bias[o];
        for (int c = 0; c < c_in; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int yy = y + ky - 1;
              const int xx = x + kx - 1;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              s += weight[((o * c_in + c) * 3 + ky) * 3 + kx] *
                   in[(c * h + yy) * w + xx];
            }
          }
        }
        out[(o * h + y) * w + x] = s;
      }
    }
  }
  return out;
}

std::vector<double> NaivePool(const std::vector<double>& in, int c, int h,
                              int w) {
  std::vector<double> out(static_cast<std::size_t>(c) * (h / 2) * (w / 2));
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h / 2; ++y) {
      for (int x = 0; x < w / 2; ++x) {
        double m = -INFINITY;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            m = std::max(m, in[(k * h + 2 * y + dy) * w + 2 * x + dx]);
          }
        }
        out[(k * (h / 2) + y) * (w / 2) + x] = m;
      }
    }
  }
  return out;
}

std::vector<double> NaiveDense(const std::vector<double>& in,
                               const Tensor<double>& weight,
                               const Tensor<double>& bias) {
  std::vector<double> out(weight.dim(0));
  for (int o = 0; o < weight.dim(0); ++o) {
    double s = bias[o];
    for (int i = 0; i < weight.dim(1); ++i) s += weight[o * weight.dim(1) + i] * in[i];
    out[o] = s;
  }
  return out;
}

void Relu(std::vector<double>& v) {
  for (double& x : v) x = std::max(x, 0.0);
}

double SumProduct(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(ArchitectureTest, DefaultParameterCounts) {
  EXPECT_EQ(Architecture::Default(64).ParameterCount(), 150797u);
  EXPECT_EQ(Architecture::Default(32).ParameterCount(), 52493u);
  EXPECT_EQ(Architecture::Default(64).LayerOutputShapes().back(),
            (std::vector<int>{5}));
}

TEST(ArchitectureTest, DefaultStack) {
  const Architecture a = Architecture::Default(128);
  int convs = 0;
  int pools = 0;
  std::vector<int> dense;
  for (const LayerSpec& l : a.layers) {
    convs += l.kind == LayerKind::kConv;
    pools += l.kind == LayerKind::kMaxPool;
    if (l.kind == LayerKind::kDense) dense.push_back(l.units);
  }
  EXPECT_EQ(convs, 6);
  EXPECT_EQ(pools, 4);
  EXPECT_EQ(dense, (std::vector<int>{256, 5}));
}

TEST(ArchitectureTest, RejectsInconsistentStacks) {
  Architecture odd = Small();
  odd.in_height = 5;
  EXPECT_THROW(odd.LayerOutputShapes(), std::invalid_argument);
  Architecture wrong_out = Small();
  wrong_out.layers.back() = LayerSpec::Dense(4);
  EXPECT_THROW(wrong_out.LayerOutputShapes(), std::invalid_argument);
  Architecture conv_after_flatten = Small();
  conv_after_flatten.layers.insert(conv_after_flatten.layers.begin() + 6,
                                   LayerSpec::Conv(2));
  EXPECT_THROW(conv_after_flatten.LayerOutputShapes(), std::invalid_argument);
}

TEST(ArchitectureTest, JsonRoundTripAndId) {
  const Architecture a = Architecture::Default(64);
  EXPECT_EQ(nlohmann::json(a).get<Architecture>(), a);
  EXPECT_EQ(nlohmann::json(Small()).get<Architecture>(), Small());
  EXPECT_NE(a.Id(), Architecture::Default(32).Id());
  EXPECT_EQ(a.Id().rfind("qnet-v1:3x64x64:", 0), 0u);
}

TEST(QNetworkTest, ZeroWeightsGiveOutputBias) {
  QNetwork<double> net(Small());
  for (auto& p : net.params()) p.Fill(0.0);
  auto& out_bias = net.params().back();
  for (int k = 0; k < 5; ++k) out_bias[k] = 0.5 * k - 1.0;
  Rng rng(1);
  const Tensor<double> q = net.Forward(RandomInput<double>(Small(), 3, rng));
  ASSERT_EQ(q.shape(), (std::vector<int>{3, 5}));
  for (int b = 0; b < 3; ++b) {
    for (int k = 0; k < 5; ++k) EXPECT_EQ(q[b * 5 + k], 0.5 * k - 1.0);
  }
}

TEST(QNetworkTest, ForwardMatchesNaiveReference) {
  const Architecture a = Small();
  QNetwork<double> net(a);
  Rng rng(2);
  net.InitializeUniform(rng);
  for (std::size_t i = 1; i < net.params().size(); i += 2) {
    for (double& v : net.params()[i].values()) v = rng.Uniform(-0.1, 0.1);
  }
  const Tensor<double> x = RandomInput<double>(a, 2, rng);
  const Tensor<double> q = net.Forward(x);
  const auto& p = net.params();
  for (int b = 0; b < 2; ++b) {
    std::vector<double> v(x.data() + b * 32, x.data() + (b + 1) * 32);
    v = NaiveConv(v, 2, 4, 4, p[0], p[1]);
    Relu(v);
    v = NaivePool(v, 3, 4, 4);
    v = NaiveConv(v, 3, 2, 2, p[2], p[3]);
    Relu(v);
    v = NaiveDense(v, p[4], p[5]);
    Relu(v);
    v = NaiveDense(v, p[6], p[7]);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(q[b * 5 + k], v[k], 1e-12);
  }
}

TEST(QNetworkTest, BatchRowsAreIndependent) {
  const Architecture a = Architecture::Default(32);
  QNetwork<float> net(a);
  Rng rng(3);
  net.InitializeUniform(rng);
  const Tensor<float> x = RandomInput<float>(a, 4, rng);
  const Tensor<float> q = net.Forward(x);
  const std::size_t per = 3 * 32 * 32;
  for (int b = 0; b < 4; ++b) {
    Tensor<float> one({1, 3, 32, 32},
                      std::vector<float>(x.data() + b * per,
                                         x.data() + (b + 1) * per));
    const Tensor<float> qb = net.Forward(one);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(qb[k], q[b * 5 + k], 1e-5);
  }
}

TEST(QNetworkTest, RejectsWrongInputShape) {
  QNetwork<float> net(Architecture::Default(32));
  EXPECT_THROW(net.Forward(Tensor<float>({1, 3, 64, 64})),
               std::invalid_argument);
}

TEST(QNetworkTest, InitializationBoundsAndDeterminism) {
  QNetwork<float> a(Architecture::Default(64));
  QNetwork<float> b(Architecture::Default(64));
  Rng ra(4);
  Rng rb(4);
  a.InitializeUniform(ra);
  b.InitializeUniform(rb);
  EXPECT_EQ(a.params(), b.params());
  for (std::size_t i = 0; i < a.params().size(); i += 2) {
    const auto& s = a.params()[i].shape();
    const double fan_in = s.size() == 4 ? s[1] * 9.0 : s[1];
    const double fan_out = s.size() == 4 ? s[0] * 9.0 : s[0];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    float lo = 0;
    float hi = 0;
    for (float w : a.params()[i].values()) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    EXPECT_LE(hi, limit);
    EXPECT_GE(lo, -limit);
    EXPECT_GT(hi, 0.8 * limit);
    for (float v : a.params()[i + 1].values()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(QNetworkTest, GradientsMatchFiniteDifferences) {
  const Architecture a = Small();
  Rng rng(5);
  for (int draw = 0; draw < 5; ++draw) {
    QNetwork<double> net(a);
    net.InitializeUniform(rng);
    for (std::size_t i = 1; i < net.params().size(); i += 2) {
      for (double& v : net.params()[i].values()) v = rng.Uniform(-0.2, 0.2);
    }
    const Tensor<double> x = RandomInput<double>(a, 3, rng);
    Tensor<double> g({3, 5});
    for (double& v : g.values()) v = rng.Uniform(-1, 1);

    ForwardTrace<double> trace;
    net.Forward(x, &trace);
    const ParamList<double> grads = net.Backward(trace, g);
    const double h = 1e-6;
    for (std::size_t t = 0; t < net.params().size(); ++t) {
      for (std::size_t i = 0; i < net.params()[t].size(); ++i) {
        double& w = net.params()[t][i];
        const double saved = w;
        w = saved + h;
        const double up = SumProduct(net.Forward(x), g);
        w = saved - h;
        const double down = SumProduct(net.Forward(x), g);
        w = saved;
        const double fd = (up - down) / (2 * h);
        const double an = grads[t][i];
        EXPECT_LE(std::abs(fd - an), 1e-6 * std::max(1.0, std::abs(fd)))
            << "tensor " << t << " index " << i;
      }
    }
  }
}

TEST(QNetworkTest, OutputBiasGradientIsColumnSum) {
  QNetwork<double> net(Small());
  Rng rng(6);
  net.InitializeUniform(rng);
  ForwardTrace<double> trace;
  net.Forward(RandomInput<double>(Small(), 4, rng), &trace);
  Tensor<double> g({4, 5});
  for (double& v : g.values()) v = rng.Uniform(-1, 1);
  const ParamList<double> grads = net.Backward(trace, g);
  for (int k = 0; k < 5; ++k) {
    double s = 0.0;
    for (int b = 0; b < 4; ++b) s += g[b * 5 + k];
    EXPECT_NEAR(grads.back()[k], s, 1e-14);
  }
}

TEST(QNetworkTest, ZerosLikeMatchesShapes) {
  QNetwork<float> net(Architecture::Default(32));
  const ParamList<float> z = ZerosLike(net.params());
  ASSERT_EQ(z.size(), net.params().size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_EQ(z[i].shape(), net.params()[i].shape());
    for (float v : z[i].values()) EXPECT_EQ(v, 0.0f);
  }
}

}  // namespace
}  // namespace pushdqn

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spikedet/conv.hpp"
#include "support.hpp"

using namespace spikedet;
using support::kind_of;

namespace {

ConvLayer random_conv(std::mt19937_64& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                      std::size_t pad) {
  ConvLayer conv = ConvLayer::make(in, out, k, stride, pad);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (float& v : conv.weight) v = d(rng);
  for (float& v : conv.bias) v = d(rng);
  return conv;
}

struct Case {
  Shape shape;
  std::size_t out, k, stride, pad;
};

Case random_case(std::mt19937_64& rng) {
  const std::size_t k = 1 + 2 * (rng() % 2) + (rng() % 4 == 0 ? 1 : 0);  // 1, 2, 3 or 4
  const std::size_t pad = rng() % (k / 2 + 1);
  const std::size_t stride = 1 + rng() % 2;
  return {Shape{1 + rng() % 3, 1 + rng() % 4, k + rng() % 7, k + rng() % 7}, 1 + rng() % 5, k, stride, pad};
}

}  // namespace

TEST(SpikeConv, MatchesLongDoubleOracle) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const Case c = random_case(rng);
    const ConvLayer conv = random_conv(rng, c.shape.c, c.out, c.k, c.stride, c.pad);
    const SpikeTensor x = support::random_spikes(rng, c.shape);
    const FloatTensor y = spike_conv(x, conv);
    const std::vector<double> w(conv.weight.begin(), conv.weight.end());
    const std::vector<double> b(conv.bias.begin(), conv.bias.end());
    for (std::size_t t = 0; t < c.shape.t; ++t) {
      const std::vector<double> xs(x.step(t).begin(), x.step(t).end());
      const auto ref = oracle::conv(xs, int(c.shape.c), int(c.shape.h), int(c.shape.w), w, b, int(c.out), int(c.k),
                                    int(c.stride), int(c.pad));
      auto got = y.step(t);
      ASSERT_EQ(got.size(), ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], double(ref[i]), 1e-6);
    }
  }
}

TEST(SpikeConv, BitIdenticalToDenseGather) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const Case c = random_case(rng);
    const ConvLayer conv = random_conv(rng, c.shape.c, c.out, c.k, c.stride, c.pad);
    const SpikeTensor x = support::random_spikes(rng, c.shape);
    EXPECT_EQ(spike_conv(x, conv), (conv2d<float>(x, conv)));
  }
}

TEST(SpikeConv, AccumulationCountMatchesLiteralCount) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const Case c = random_case(rng);
    const ConvLayer conv = random_conv(rng, c.shape.c, c.out, c.k, c.stride, c.pad);
    const SpikeTensor x = support::random_spikes(rng, c.shape, 0.3);
    ConvCounters counters;
    spike_conv(x, conv, &counters);
    ASSERT_EQ(counters.accumulations.size(), c.shape.t);
    EXPECT_EQ(counters.input_neurons, c.shape.step());
    for (std::size_t t = 0; t < c.shape.t; ++t) {
      const std::vector<int> s(x.step(t).begin(), x.step(t).end());
      EXPECT_EQ(counters.accumulations[t], oracle::spike_conv_adds(s, int(c.shape.c), int(c.shape.h),
                                                                   int(c.shape.w), int(c.out), int(c.k),
                                                                   int(c.stride), int(c.pad)));
      std::uint64_t ones = 0;
      for (int v : s) ones += std::uint64_t(v);
      EXPECT_EQ(counters.input_spikes[t], ones);
    }
  }
}

TEST(SpikeConv, SilentInputGivesBiasEverywhere) {
  std::mt19937_64 rng(44);
  const ConvLayer conv = random_conv(rng, 3, 4, 3, 1, 1);
  const FloatTensor y = spike_conv(SpikeTensor(Shape{2, 3, 5, 5}), conv);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t o = 0; o < 4; ++o)
      for (float v : y.plane(t, o)) EXPECT_EQ(v, conv.bias[o]);
}

TEST(SpikeConv, SingleSpikeReproducesFlippedKernel) {
  ConvLayer conv = ConvLayer::make(1, 1, 3, 1, 1);
  for (std::size_t i = 0; i < 9; ++i) conv.weight[i] = float(i + 1);
  SpikeTensor x(Shape{1, 1, 5, 5});
  x(0, 0, 2, 2) = 1;
  const FloatTensor y = spike_conv(x, conv);
  for (std::size_t ky = 0; ky < 3; ++ky)
    for (std::size_t kx = 0; kx < 3; ++kx) EXPECT_EQ(y(0, 0, 3 - ky, 3 - kx), conv.w(0, 0, ky, kx));
  EXPECT_EQ(y(0, 0, 0, 0), 0.0f);
}

TEST(SpikeConv, PerStepWeightsUseTheirOwnStep) {
  ConvLayer a = ConvLayer::make(1, 1, 1);
  ConvLayer b = ConvLayer::make(1, 1, 1);
  a.weight[0] = 2.0f;
  b.weight[0] = -3.0f;
  const std::vector<ConvLayer> steps{a, b};
  const SpikeTensor x(Shape{2, 1, 1, 1}, {1, 1});
  Shape os;
  const auto y = spike_conv_accumulate<float>(x, steps, &os);
  EXPECT_EQ(y, (std::vector<double>{2.0, -3.0}));
  const std::vector<ConvLayer> three{a, b, a};
  EXPECT_EQ(kind_of([&] { spike_conv_accumulate<float>(x, three); }), ErrorKind::Shape);
}

TEST(SpikeConv, GeometryErrors) {
  const ConvLayer conv = ConvLayer::make(2, 1, 3);
  EXPECT_EQ(kind_of([&] { spike_conv(SpikeTensor(Shape{1, 3, 4, 4}), conv); }), ErrorKind::Shape);
  EXPECT_EQ(kind_of([&] { spike_conv(SpikeTensor(Shape{1, 2, 2, 2}), conv); }), ErrorKind::Shape);
  ConvLayer broken = conv;
  broken.bias.clear();
  EXPECT_EQ(kind_of([&] { spike_conv(SpikeTensor(Shape{1, 2, 4, 4}), broken); }), ErrorKind::Weights);
}

TEST(DenseConv, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(45);
  BasicConv<double> conv = BasicConv<double>::make(2, 3, 3, 2, 1);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (double& v : conv.weight) v = d(rng);
  for (double& v : conv.bias) v = d(rng);
  Tensor<double> x(Shape{2, 2, 5, 4});
  for (double& v : x.storage()) v = d(rng);
  const Shape os = conv.output_shape(x.shape());
  Tensor<double> r(os);
  for (double& v : r.storage()) v = d(rng);
  auto loss = [&](const Tensor<double>& xi, const BasicConv<double>& ci) {
    const Tensor<double> y = conv2d<double>(xi, ci);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * r.data()[i];
    return s;
  };
  const auto g = conv2d_backward(x, conv, r);
  const double h = 1e-6;
  for (std::size_t i = 0; i < conv.weight.size(); ++i) {
    BasicConv<double> p = conv, m = conv;
    p.weight[i] += h;
    m.weight[i] -= h;
    EXPECT_NEAR(g.grad_weight[i], (loss(x, p) - loss(x, m)) / (2 * h), 1e-7);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor<double> p = x, m = x;
    p.storage()[i] += h;
    m.storage()[i] -= h;
    EXPECT_NEAR(g.grad_x.data()[i], (loss(p, conv) - loss(m, conv)) / (2 * h), 1e-7);
  }
}

TEST(MaxPool, ValuesAndShape) {
  const FloatTensor x(Shape{1, 1, 2, 4}, {1, 5, -2, 0, 3, 2, 7, -1});
  const FloatTensor y = max_pool(x, 2, 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_EQ(y.data()[0], 5.0f);
  EXPECT_EQ(y.data()[1], 7.0f);
}

TEST(MaxPool, PaddingNeverWinsOverNegatives) {
  const FloatTensor x(Shape{1, 1, 3, 3}, std::vector<float>(9, -4.0f));
  const FloatTensor y = max_pool(x, 3, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (float v : y.data()) EXPECT_EQ(v, -4.0f);
}

TEST(MaxPool, BadGeometry) {
  const FloatTensor x(Shape{1, 1, 3, 3});
  EXPECT_EQ(kind_of([&] { max_pool(x, 4, 1, 0); }), ErrorKind::Shape);
  EXPECT_EQ(kind_of([&] { max_pool(x, 2, 1, 2); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { max_pool(x, 2, 0, 0); }), ErrorKind::Config);
}

TEST(Upsample, NearestRepeatsEachCell) {
  const SpikeTensor x(Shape{1, 1, 1, 2}, {1, 0});
  const SpikeTensor y = upsample_nearest(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 4}));
  EXPECT_EQ(std::vector<int>(y.data().begin(), y.data().end()), (std::vector<int>{1, 1, 0, 0, 1, 1, 0, 0}));
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spikedet/blocks.hpp"
#include "spikedet/neuron.hpp"
#include "support.hpp"

using namespace spikedet;
using support::kind_of;

namespace {

FloatTensor column(std::vector<float> per_step) {
  const std::size_t t = per_step.size();
  return FloatTensor(Shape{t, 1, 1, 1}, std::move(per_step));
}

std::vector<int> as_ints(const SpikeTensor& s) { return {s.data().begin(), s.data().end()}; }

}  // namespace

TEST(IfNeuron, HalfInputFiresEverySecondStep) {
  // membrane 0.5, 1.0 -> fire, 0.5, 1.0 -> fire
  const SpikeTensor s = if_run(column({0.5f, 0.5f, 0.5f, 0.5f}), NeuronConfig{});
  EXPECT_EQ(as_ints(s), (std::vector<int>{0, 1, 0, 1}));
}

TEST(IfNeuron, ThresholdIsInclusive) {
  EXPECT_EQ(as_ints(if_run(column({1.0f}), NeuronConfig{})), std::vector<int>{1});
  EXPECT_EQ(as_ints(if_run(column({std::nextafter(1.0f, 0.0f)}), NeuronConfig{})), std::vector<int>{0});
}

TEST(IfNeuron, HardResetDiscardsOvershoot) {
  // 2.5 fires and resets to 0; the overshoot is not carried to the next step.
  EXPECT_EQ(as_ints(if_run(column({2.5f, 0.6f, 0.6f}), NeuronConfig{})), (std::vector<int>{1, 0, 1}));
}

TEST(IfNeuron, NoLeakNegativeInputsAccumulate) {
  EXPECT_EQ(as_ints(if_run(column({-0.5f, 1.2f, 0.4f}), NeuronConfig{})), (std::vector<int>{0, 0, 1}));
}

TEST(IfNeuron, StepMatchesUnrolledRun) {
  std::mt19937_64 rng(21);
  const FloatTensor in = support::random_floats(rng, Shape{5, 3, 4, 4}, -0.5f, 1.2f);
  const NeuronConfig cfg;
  const SpikeTensor unrolled = if_run(in, cfg);
  MembraneState st = MembraneState::resting(in.shape(), cfg);
  for (std::size_t t = 0; t < in.shape().t; ++t) {
    StepResult r = if_step(st, in.time_slice(t), cfg);
    EXPECT_EQ(r.spikes, unrolled.time_slice(t));
    st = std::move(r.state);
  }
}

TEST(IfNeuron, MatchesOracleOnRandomInputs) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s{1 + rng() % 6, 1 + rng() % 3, 1 + rng() % 5, 1 + rng() % 5};
    const FloatTensor in = support::random_floats(rng, s, -1.0f, 1.5f);
    const std::vector<double> flat(in.data().begin(), in.data().end());
    EXPECT_EQ(as_ints(if_run(in, NeuronConfig{})), oracle::integrate_fire(flat, static_cast<int>(s.t)));
  }
}

TEST(IfNeuron, OutputIsAlwaysBinary) {
  std::mt19937_64 rng(23);
  const FloatTensor in = support::random_floats(rng, Shape{8, 4, 6, 6}, -3.0f, 3.0f);
  const SpikeTensor s = if_run(in, NeuronConfig{});
  for (auto v : s.data()) EXPECT_LE(v, 1);
}

TEST(IfNeuron, BadConfigIsRejected) {
  NeuronConfig cfg;
  cfg.v_th = 0.0f;
  EXPECT_EQ(kind_of([&] { if_run(column({1.0f}), cfg); }), ErrorKind::Config);
  NeuronConfig acc;
  acc.mode = NeuronMode::Accumulate;
  EXPECT_EQ(kind_of([&] { if_run(column({1.0f}), acc); }), ErrorKind::Config);
}

TEST(Accumulate, SumsOverTimeWithoutFiring) {
  const FloatTensor acc = accumulate_run(column({0.5f, 2.0f, -1.0f, 4.0f}));
  ASSERT_EQ(acc.shape().t, 1u);
  EXPECT_FLOAT_EQ(acc.data()[0], 5.5f);
}

TEST(Accumulate, SingleStepIsIdentity) {
  std::mt19937_64 rng(24);
  const FloatTensor in = support::random_floats(rng, Shape{1, 3, 4, 4}, -2.0f, 2.0f);
  EXPECT_EQ(accumulate_run(in), in);
}

TEST(Surrogate, PrimitiveAndGradientValues) {
  const SurrogateConfig sg;
  EXPECT_DOUBLE_EQ(surrogate_primitive(0.0, sg), 0.5);
  EXPECT_DOUBLE_EQ(surrogate_grad(0.0, sg), 1.0);  // alpha / 2
  // atan(pi) / pi + 1/2 at x = 1 with alpha = 2
  EXPECT_NEAR(surrogate_primitive(1.0, sg), std::atan(std::numbers::pi) / std::numbers::pi + 0.5, 1e-15);
  EXPECT_NEAR(surrogate_grad(1.0, sg), 1.0 / (1.0 + std::numbers::pi * std::numbers::pi), 1e-15);
}

TEST(Surrogate, GradientIsDerivativeOfPrimitive) {
  const SurrogateConfig sg{SurrogateKind::Arctan, 3.0};
  for (double x = -3.0; x <= 3.0; x += 0.125) {
    const double h = 1e-6;
    const double fd = (surrogate_primitive(x + h, sg) - surrogate_primitive(x - h, sg)) / (2 * h);
    EXPECT_NEAR(surrogate_grad(x, sg), fd, 1e-8) << "x = " << x;
  }
}

TEST(Surrogate, PrimitiveIsMonotoneWithUnitRange) {
  const SurrogateConfig sg;
  double prev = 0.0;
  for (double x = -50.0; x <= 50.0; x += 0.5) {
    const double v = surrogate_primitive(x, sg);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, 1.0);
    prev = v;
  }
}

TEST(PoolingOrder, CommutesAtOneStepFromRest) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 2;
    const Shape s{1, 1 + rng() % 3, k + rng() % 6, k + rng() % 6};
    const FloatTensor v = support::random_floats(rng, s, -1.0f, 2.0f);
    const std::size_t pad = k / 2;
    EXPECT_EQ(pool_then_fire(v, k, 1, pad), fire_then_pool(v, k, 1, pad));
    EXPECT_EQ(pool_then_fire(v, k, k, 0), fire_then_pool(v, k, k, 0));
  }
}

TEST(PoolingOrder, MembraneCarryoverBreaksCommutationAtTwoSteps) {
  const FloatTensor v = pool_order_counterexample();
  const SpikeTensor pooled_first = pool_then_fire(v, 2, 2, 0);
  const SpikeTensor fired_first = fire_then_pool(v, 2, 2, 0);
  EXPECT_EQ(as_ints(pooled_first), (std::vector<int>{0, 1}));
  EXPECT_EQ(as_ints(fired_first), (std::vector<int>{0, 0}));
}

TEST(Backward, DetachedResetMatchesHandDerivation) {
  // Two steps, one neuron: dL/dI_0 = dL/ds_0 * g'(h_0) + dL/dI_1 * (1 - s_0).
  const SurrogateConfig sg;
  const NeuronConfig cfg;
  const std::vector<double> charged{0.4, 1.1};
  const std::vector<double> gate{0.0, 1.0};
  const std::vector<double> gs{0.3, -0.7};
  const auto g = if_backward<double>(charged, gate, gs, 2, cfg, sg, ResetGradient::Detach);
  const double d1 = -0.7 * surrogate_grad(0.1, sg);
  const double d0 = 0.3 * surrogate_grad(-0.6, sg) + d1 * 1.0;
  EXPECT_NEAR(g[1], d1, 1e-15);
  EXPECT_NEAR(g[0], d0, 1e-15);
}

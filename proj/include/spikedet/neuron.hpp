#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

enum class NeuronMode { Firing, Accumulate };

struct NeuronConfig {
  float v_th = 1.0f;
  float v_rst = 0.0f;
  NeuronMode mode = NeuronMode::Firing;

  void validate() const {
    if (mode == NeuronMode::Firing && !(v_th > v_rst)) {
      fail(ErrorKind::Config, "firing neurons need v_th > v_rst");
    }
  }
};

/// Membrane potentials at the current step (t == 1).
struct MembraneState {
  FloatTensor v;

  static MembraneState resting(const Shape& shape, const NeuronConfig& cfg) {
    return {FloatTensor::filled(shape.with_t(1), cfg.v_rst)};
  }
};

struct StepResult {
  SpikeTensor spikes;
  MembraneState state;
};

/// One integrate-and-fire step: charge, fire at v >= v_th, hard reset to v_rst.
inline StepResult if_step(const MembraneState& state, const FloatTensor& input,
                          const NeuronConfig& cfg) {
  cfg.validate();
  if (cfg.mode != NeuronMode::Firing) fail(ErrorKind::Config, "if_step requires FIRING mode");
  if (input.shape().t != 1 || state.v.shape() != input.shape()) {
    fail(ErrorKind::Shape, "if_step: state " + state.v.shape().str() + " vs input " +
                               input.shape().str());
  }
  StepResult out{SpikeTensor(input.shape()), MembraneState{FloatTensor(input.shape())}};
  auto v = state.v.data();
  auto in = input.data();
  auto s = out.spikes.data();
  auto nv = out.state.v.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float charged = v[i] + in[i];
    const bool fire = charged >= cfg.v_th;
    s[i] = fire ? 1 : 0;
    nv[i] = fire ? cfg.v_rst : charged;
  }
  return out;
}

/// Unrolled IF over all time steps of `inputs`, membrane starting at v_rst.
/// Optionally reports the pre-reset membrane of every step.
inline SpikeTensor if_run(const FloatTensor& inputs, const NeuronConfig& cfg,
                          FloatTensor* charged_out = nullptr) {
  cfg.validate();
  if (cfg.mode != NeuronMode::Firing) fail(ErrorKind::Config, "if_run requires FIRING mode");
  const Shape& s = inputs.shape();
  SpikeTensor spikes(s);
  if (charged_out) *charged_out = FloatTensor(s);
  std::vector<float> v(s.step(), cfg.v_rst);
  for (std::size_t t = 0; t < s.t; ++t) {
    auto in = inputs.step(t);
    auto out = spikes.step(t);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const float charged = v[i] + in[i];
      if (charged_out) charged_out->step(t)[i] = charged;
      const bool fire = charged >= cfg.v_th;
      out[i] = fire ? 1 : 0;
      v[i] = fire ? cfg.v_rst : charged;
    }
  }
  return spikes;
}

/// Infinite-threshold readout: sums the inputs over t (64-bit accumulation).
inline FloatTensor accumulate_run(const FloatTensor& inputs) {
  const Shape& s = inputs.shape();
  std::vector<double> acc(s.step(), 0.0);
  for (std::size_t t = 0; t < s.t; ++t) {
    auto in = inputs.step(t);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += in[i];
  }
  FloatTensor out(s.with_t(1));
  auto dst = out.data();
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
  return out;
}

enum class SurrogateKind { Arctan };

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::Arctan;
  double alpha = 2.0;

  void validate() const {
    if (!(alpha > 0.0)) fail(ErrorKind::Config, "surrogate alpha must be positive");
  }
};

/// Smooth stand-in for the Heaviside step: atan(pi*alpha*x/2)/pi + 1/2.
template <class Real>
Real surrogate_primitive(Real x, const SurrogateConfig& cfg) {
  const Real pi = std::numbers::pi_v<Real>;
  const Real a = static_cast<Real>(cfg.alpha);
  return std::atan(pi * a * x / Real(2)) / pi + Real(0.5);
}

/// Derivative of surrogate_primitive: (alpha/2) / (1 + (pi*alpha*x/2)^2).
template <class Real>
Real surrogate_grad(Real x, const SurrogateConfig& cfg) {
  const Real pi = std::numbers::pi_v<Real>;
  const Real a = static_cast<Real>(cfg.alpha);
  const Real u = pi * a * x / Real(2);
  return (a / Real(2)) / (Real(1) + u * u);
}

inline FloatTensor surrogate_grad(const FloatTensor& v_minus_th, const SurrogateConfig& cfg) {
  cfg.validate();
  FloatTensor out(v_minus_th.shape());
  auto src = v_minus_th.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(surrogate_grad<double>(src[i], cfg));
  }
  return out;
}

/// How the reset gate (1 - spike) is treated when differentiating through time.
enum class ResetGradient {
  Detach,  // gate is a constant; the usual training choice
  Full,    // gate is differentiated through the surrogate as well
};

/// Backprop through the IF recurrence for one neuron population.
///
/// `charged[t]` is the pre-reset membrane at step t and `gate[t]` the spike
/// value the forward pass used for the reset (hard spikes for a real run,
/// surrogate values for a relaxed one). `grad_spikes[t]` is dL/ds_t. Returns
/// dL/dI_t for the synaptic input at each step. All arrays are (T x n) flat.
template <class Real>
std::vector<Real> if_backward(std::span<const Real> charged, std::span<const Real> gate,
                              std::span<const Real> grad_spikes, std::size_t steps,
                              const NeuronConfig& cfg, const SurrogateConfig& sg,
                              ResetGradient reset) {
  const std::size_t n = steps == 0 ? 0 : charged.size() / steps;
  if (charged.size() != steps * n || gate.size() != charged.size() ||
      grad_spikes.size() != charged.size()) {
    fail(ErrorKind::Shape, "if_backward: inconsistent buffer sizes");
  }
  std::vector<Real> grad_input(charged.size());
  std::vector<Real> grad_v(n, Real(0));  // dL/dv_t flowing back from step t+1
  const Real th = static_cast<Real>(cfg.v_th);
  const Real rst = static_cast<Real>(cfg.v_rst);
  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = t * n + i;
      const Real h = charged[k];
      // v_t = (1 - g) * h + g * rst
      Real ds = grad_spikes[k];
      if (reset == ResetGradient::Full) ds += grad_v[i] * (rst - h);
      const Real dh = ds * surrogate_grad<Real>(h - th, sg) + grad_v[i] * (Real(1) - gate[k]);
      grad_input[k] = dh;
      grad_v[i] = dh;
    }
  }
  return grad_input;
}

}  // namespace spikedet

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spikedet/conv.hpp"
#include "spikedet/error.hpp"
#include "spikedet/neuron.hpp"
#include "spikedet/normalization.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

// Analytic backward passes checked against central finite differences, in
// double precision. The loss is a fixed random projection of the outputs,
// L = sum_i r_i * y_i: a plain sum would make every SeBN gradient vanish.

inline constexpr std::size_t kGradCheckMaxParams = 5000;

struct GradCheckEntry {
  std::string name;  // e.g. "conv[3].weight"
  std::size_t count = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double tolerance = 1e-3;
  std::vector<GradCheckEntry> entries;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_error);
    return w;
  }
  bool pass() const { return !entries.empty() && worst() <= tolerance; }
};

/// max|a - n| / max|n|, with a floor on the denominator.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) fail(ErrorKind::Shape, "gradient size mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!std::isfinite(analytic[i]) || !std::isfinite(numeric[i])) {
      fail(ErrorKind::Validation, "non-finite gradient");
    }
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  return diff / std::max(scale, 1e-8);
}

/// Central differences of `loss` with respect to every entry of `p`.
inline std::vector<double> numeric_gradient(std::vector<double>& p, const std::function<double()>& loss,
                                            double h = 1e-5) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = loss();
    p[i] = keep - h;
    const double down = loss();
    p[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace detail {

inline void check_fragment(const std::string& name, std::size_t entries) {
  if (entries > kGradCheckMaxParams) {
    fail(ErrorKind::Config, name + ": fragment has " + std::to_string(entries) +
                                " differentiable entries, finite differences are capped at " +
                                std::to_string(kGradCheckMaxParams));
  }
}

inline std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace detail

/// One random conv instance: gradients for weight, bias and input.
inline std::vector<GradCheckEntry> gradcheck_conv(std::mt19937_64& rng, const std::string& name) {
  const std::size_t cin = detail::pick(rng, 1, 3);
  const std::size_t cout = detail::pick(rng, 1, 3);
  const std::size_t k = detail::pick(rng, 0, 1) ? 3 : 1;
  const std::size_t stride = detail::pick(rng, 1, 2);
  const std::size_t pad = k / 2;
  const Shape s{detail::pick(rng, 1, 2), cin, detail::pick(rng, k, 5), detail::pick(rng, k, 5)};

  BasicConv<double> conv = BasicConv<double>::make(cin, cout, k, stride, pad);
  conv.weight = detail::uniform_vec(rng, conv.weight.size(), -1.0, 1.0);
  conv.bias = detail::uniform_vec(rng, cout, -1.0, 1.0);
  Tensor<double> x(s, detail::uniform_vec(rng, s.numel(), -1.0, 1.0));
  const Shape os = conv.output_shape(s);
  const std::vector<double> r = detail::uniform_vec(rng, os.numel(), -1.0, 1.0);
  detail::check_fragment(name, conv.parameter_count() + x.size());

  auto loss = [&] { return detail::dot(conv2d<double>(x, conv).data(), r); };
  const ConvGrads<double> g = conv2d_backward(x, conv, Tensor<double>(os, r));

  std::vector<GradCheckEntry> out;
  out.push_back({name + ".weight", conv.weight.size(),
                 relative_error(g.grad_weight, numeric_gradient(conv.weight, loss))});
  out.push_back({name + ".bias", conv.bias.size(), relative_error(g.grad_bias, numeric_gradient(conv.bias, loss))});
  std::vector<double>& xs = x.storage();
  out.push_back({name + ".input", xs.size(), relative_error(g.grad_x.data(), numeric_gradient(xs, loss))});
  return out;
}

/// One random train-mode SeBN instance: gradients for gamma, beta and input.
inline std::vector<GradCheckEntry> gradcheck_sebn(std::mt19937_64& rng, const std::string& name) {
  const std::size_t t = detail::pick(rng, 1, 3);
  const std::size_t c = detail::pick(rng, 1, 3);
  const std::size_t n = detail::pick(rng, 1, 4);
  const std::size_t batch = detail::pick(rng, 2, 3);
  const Shape s{t, c, detail::pick(rng, 2, 4), detail::pick(rng, 2, 4)};

  BasicSeBN<double> layer = BasicSeBN<double>::make(t, c, n);
  layer.gamma = detail::uniform_vec(rng, t * c, 0.5, 1.5);
  layer.beta = detail::uniform_vec(rng, t * c, -0.5, 0.5);
  Batch<double> xs;
  std::vector<std::vector<double>> rs;
  for (std::size_t b = 0; b < batch; ++b) {
    xs.emplace_back(s, detail::uniform_vec(rng, s.numel(), -2.0, 2.0));
    rs.push_back(detail::uniform_vec(rng, s.numel(), -1.0, 1.0));
  }
  detail::check_fragment(name, 2 * t * c + batch * s.numel());

  auto loss = [&] {
    const Batch<double> ys = sebn_forward_train<double>(xs, layer, nullptr, false);
    double l = 0.0;
    for (std::size_t b = 0; b < ys.size(); ++b) l += detail::dot(ys[b].data(), rs[b]);
    return l;
  };
  SeBNCache<double> cache;
  sebn_forward_train(xs, layer, &cache, false);
  Batch<double> grad_out;
  for (std::size_t b = 0; b < batch; ++b) grad_out.emplace_back(s, rs[b]);
  const SeBNGrads<double> g = sebn_backward(grad_out, cache, layer);

  std::vector<GradCheckEntry> out;
  out.push_back({name + ".gamma", layer.gamma.size(),
                 relative_error(g.grad_gamma, numeric_gradient(layer.gamma, loss))});
  out.push_back({name + ".beta", layer.beta.size(),
                 relative_error(g.grad_beta, numeric_gradient(layer.beta, loss))});
  std::vector<double> analytic;
  std::vector<double> flat;
  for (std::size_t b = 0; b < batch; ++b) {
    analytic.insert(analytic.end(), g.grad_x[b].data().begin(), g.grad_x[b].data().end());
    flat.insert(flat.end(), xs[b].data().begin(), xs[b].data().end());
  }
  auto flat_loss = [&] {
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(b * s.numel()), s.numel(), xs[b].data().begin());
    }
    return loss();
  };
  out.push_back({name + ".input", flat.size(), relative_error(analytic, numeric_gradient(flat, flat_loss))});
  return out;
}

/// Forward of the relaxed IF recurrence: the Heaviside is replaced by the
/// surrogate primitive g = S(h - v_th) and v = (1 - g) h + g v_rst. With
/// `frozen_gate`, the reset uses that fixed gate instead of g.
inline std::vector<double> relaxed_if_forward(std::span<const double> input, std::size_t steps,
                                              const NeuronConfig& cfg, const SurrogateConfig& sg,
                                              std::vector<double>* charged = nullptr,
                                              std::vector<double>* gate = nullptr,
                                              std::span<const double> frozen_gate = {}) {
  const std::size_t n = input.size() / steps;
  std::vector<double> v(n, static_cast<double>(cfg.v_rst));
  std::vector<double> out(input.size());
  if (charged) charged->assign(input.size(), 0.0);
  if (gate) gate->assign(input.size(), 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = t * n + i;
      const double h = v[i] + input[k];
      const double g = surrogate_primitive<double>(h - cfg.v_th, sg);
      const double reset = frozen_gate.empty() ? g : frozen_gate[k];
      v[i] = (1.0 - reset) * h + reset * cfg.v_rst;
      out[k] = g;
      if (charged) (*charged)[k] = h;
      if (gate) (*gate)[k] = g;
    }
  }
  return out;
}

/// conv -> relaxed IF over two steps. BPTT with the given reset treatment is
/// compared with finite differences of the matching relaxed forward: the full
/// relaxation for ResetGradient::Full, the frozen-gate relaxation for Detach.
inline std::vector<GradCheckEntry> gradcheck_if_chain(std::mt19937_64& rng, ResetGradient reset,
                                                      const std::string& name) {
  const std::size_t steps = 2;
  const Shape s{steps, 2, 4, 4};
  BasicConv<double> conv = BasicConv<double>::make(2, 3, 3, 1, 1);
  conv.weight = detail::uniform_vec(rng, conv.weight.size(), -0.4, 0.4);
  conv.bias = detail::uniform_vec(rng, 3, 0.2, 0.8);
  Tensor<double> x(s, detail::uniform_vec(rng, s.numel(), 0.0, 1.0));
  const Shape os = conv.output_shape(s);
  const std::vector<double> r = detail::uniform_vec(rng, os.numel(), -1.0, 1.0);
  detail::check_fragment(name, conv.parameter_count() + x.size());
  const NeuronConfig cfg;
  const SurrogateConfig sg;

  std::vector<double> charged;
  std::vector<double> gate;
  relaxed_if_forward(conv2d<double>(x, conv).data(), steps, cfg, sg, &charged, &gate);
  const std::vector<double> frozen = gate;
  auto loss = [&] {
    const Tensor<double> current = conv2d<double>(x, conv);
    const std::span<const double> fz =
        reset == ResetGradient::Detach ? std::span<const double>(frozen) : std::span<const double>();
    return detail::dot(relaxed_if_forward(current.data(), steps, cfg, sg, nullptr, nullptr, fz), r);
  };

  const std::vector<double> grad_current = if_backward<double>(charged, gate, r, steps, cfg, sg, reset);
  const ConvGrads<double> g = conv2d_backward(x, conv, Tensor<double>(os, grad_current));

  std::vector<GradCheckEntry> out;
  out.push_back({name + ".weight", conv.weight.size(),
                 relative_error(g.grad_weight, numeric_gradient(conv.weight, loss))});
  out.push_back({name + ".bias", conv.bias.size(), relative_error(g.grad_bias, numeric_gradient(conv.bias, loss))});
  std::vector<double>& xs = x.storage();
  out.push_back({name + ".input", xs.size(), relative_error(g.grad_x.data(), numeric_gradient(xs, loss))});
  return out;
}

/// The full suite: `instances` random conv and SeBN cases plus both IF-chain checks.
inline GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances = 20) {
  std::mt19937_64 rng(seed);
  GradCheckReport report;
  auto append = [&](std::vector<GradCheckEntry> e) {
    report.entries.insert(report.entries.end(), e.begin(), e.end());
  };
  for (std::size_t i = 0; i < instances; ++i) append(gradcheck_conv(rng, "conv[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < instances; ++i) append(gradcheck_sebn(rng, "sebn[" + std::to_string(i) + "]"));
  append(gradcheck_if_chain(rng, ResetGradient::Full, "if_chain.full_reset"));
  append(gradcheck_if_chain(rng, ResetGradient::Detach, "if_chain.detached_reset"));
  return report;
}

}  // namespace spikedet

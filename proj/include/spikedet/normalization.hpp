#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spikedet/conv.hpp"
#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

/// Separated batch normalization: independent statistics and affine parameters
/// for every (time step, channel) pair, with the output variance scaled by 1/n
/// so that n summed residual branches stay at unit variance.
template <class Real>
struct BasicSeBN {
  std::size_t t_steps = 1;
  std::size_t channels = 1;
  std::vector<Real> gamma;     // [t][k]
  std::vector<Real> beta;      // [t][k]
  std::vector<Real> run_mean;  // [t][k]
  std::vector<Real> run_var;   // [t][k]
  std::size_t n = 1;
  double eps = 1e-5;
  double momentum = 0.1;
  bool stats_ready = false;

  static BasicSeBN make(std::size_t t_steps, std::size_t channels, std::size_t n = 1) {
    BasicSeBN bn;
    bn.t_steps = t_steps;
    bn.channels = channels;
    bn.gamma.assign(t_steps * channels, Real(1));
    bn.beta.assign(t_steps * channels, Real(0));
    bn.run_mean.assign(t_steps * channels, Real(0));
    bn.run_var.assign(t_steps * channels, Real(1));
    bn.n = n;
    return bn;
  }

  std::size_t idx(std::size_t t, std::size_t k) const { return t * channels + k; }

  /// sqrt(n * (var + eps)) for the given variance.
  double denom(double var) const { return std::sqrt(static_cast<double>(n) * (var + eps)); }

  std::size_t parameter_count() const { return gamma.size() + beta.size(); }

  void validate() const {
    if (t_steps == 0 || channels == 0) fail(ErrorKind::Config, "SeBN extents must be positive");
    if (n < 1) fail(ErrorKind::Config, "SeBN branch divisor n must be >= 1");
    if (!(eps > 0.0)) fail(ErrorKind::Config, "SeBN eps must be positive");
    const std::size_t m = t_steps * channels;
    if (gamma.size() != m || beta.size() != m || run_mean.size() != m || run_var.size() != m) {
      fail(ErrorKind::Weights, "SeBN parameter arrays must hold T x C entries");
    }
    for (Real v : run_var) {
      if (v < Real(0)) fail(ErrorKind::Weights, "SeBN running variance must be nonnegative");
    }
  }

  void check_input(const Shape& s) const {
    if (s.t != t_steps || s.c != channels) {
      fail(ErrorKind::Shape, "SeBN configured for T=" + std::to_string(t_steps) + ", C=" +
                                 std::to_string(channels) + " but got " + s.str());
    }
  }
};

using SeBNLayer = BasicSeBN<float>;

/// Conventional per-channel batch normalization, shared across time steps.
template <class Real>
struct BasicBatchNorm {
  std::size_t channels = 1;
  std::vector<Real> gamma;
  std::vector<Real> beta;
  std::vector<Real> run_mean;
  std::vector<Real> run_var;
  double eps = 1e-5;
  double momentum = 0.1;
  bool stats_ready = false;

  static BasicBatchNorm make(std::size_t channels) {
    BasicBatchNorm bn;
    bn.channels = channels;
    bn.gamma.assign(channels, Real(1));
    bn.beta.assign(channels, Real(0));
    bn.run_mean.assign(channels, Real(0));
    bn.run_var.assign(channels, Real(1));
    return bn;
  }

  std::size_t parameter_count() const { return gamma.size() + beta.size(); }

  void validate() const {
    if (channels == 0) fail(ErrorKind::Config, "BN channel count must be positive");
    if (!(eps > 0.0)) fail(ErrorKind::Config, "BN eps must be positive");
    if (gamma.size() != channels || beta.size() != channels || run_mean.size() != channels ||
        run_var.size() != channels) {
      fail(ErrorKind::Weights, "BN parameter arrays must hold C entries");
    }
    for (Real v : run_var) {
      if (v < Real(0)) fail(ErrorKind::Weights, "BN running variance must be nonnegative");
    }
  }
};

using BatchNormLayer = BasicBatchNorm<float>;

template <class Real>
using Batch = std::vector<Tensor<Real>>;

/// State kept by a training-mode forward for the backward pass.
template <class Real>
struct SeBNCache {
  Batch<Real> input;
  std::vector<double> mean;  // [t][k]
  std::vector<double> var;   // [t][k], biased
  bool valid = false;
};

namespace detail {

template <class Real>
void check_batch(const Batch<Real>& batch, std::size_t min_size) {
  if (batch.size() < min_size) {
    fail(ErrorKind::Shape, "training-mode normalization needs a batch of at least " +
                               std::to_string(min_size));
  }
  for (const auto& x : batch) {
    if (x.shape() != batch.front().shape()) fail(ErrorKind::Shape, "batch shapes differ");
  }
}

}  // namespace detail

/// Per-(t, k) batch moments over N*H*W values (64-bit accumulation, biased variance).
template <class Real>
void sebn_batch_moments(const Batch<Real>& batch, std::vector<double>& mean,
                        std::vector<double>& var) {
  const Shape& s = batch.front().shape();
  const std::size_t groups = s.t * s.c;
  const double count = static_cast<double>(batch.size() * s.plane());
  mean.assign(groups, 0.0);
  var.assign(groups, 0.0);
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t k = 0; k < s.c; ++k) {
      double sum = 0.0;
      for (const auto& x : batch)
        for (Real v : x.plane(t, k)) sum += static_cast<double>(v);
      const double mu = sum / count;
      double sq = 0.0;
      for (const auto& x : batch) {
        for (Real v : x.plane(t, k)) {
          const double d = static_cast<double>(v) - mu;
          sq += d * d;
        }
      }
      mean[t * s.c + k] = mu;
      var[t * s.c + k] = sq / count;
    }
  }
}

/// Training-mode SeBN over a batch of (T, C, H, W) tensors. Updates the running
/// statistics by EMA unless `update_stats` is false.
template <class Real>
Batch<Real> sebn_forward_train(const Batch<Real>& batch, BasicSeBN<Real>& layer,
                               SeBNCache<Real>* cache = nullptr, bool update_stats = true) {
  layer.validate();
  detail::check_batch(batch, 2);
  const Shape& s = batch.front().shape();
  layer.check_input(s);
  std::vector<double> mean;
  std::vector<double> var;
  sebn_batch_moments(batch, mean, var);

  Batch<Real> out;
  out.reserve(batch.size());
  for (const auto& x : batch) {
    Tensor<Real> y(s);
    for (std::size_t t = 0; t < s.t; ++t) {
      for (std::size_t k = 0; k < s.c; ++k) {
        const std::size_t g = layer.idx(t, k);
        const double d = layer.denom(var[g]);
        const double gm = static_cast<double>(layer.gamma[g]);
        const double bt = static_cast<double>(layer.beta[g]);
        auto src = x.plane(t, k);
        auto dst = y.plane(t, k);
        for (std::size_t i = 0; i < src.size(); ++i) {
          dst[i] = static_cast<Real>(gm * ((static_cast<double>(src[i]) - mean[g]) / d) + bt);
        }
      }
    }
    out.push_back(std::move(y));
  }
  if (update_stats) {
    const double m = layer.momentum;
    for (std::size_t g = 0; g < mean.size(); ++g) {
      layer.run_mean[g] = static_cast<Real>((1.0 - m) * layer.run_mean[g] + m * mean[g]);
      layer.run_var[g] = static_cast<Real>((1.0 - m) * layer.run_var[g] + m * var[g]);
    }
    layer.stats_ready = true;
  }
  if (cache) {
    cache->input = batch;
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->valid = true;
  }
  return out;
}

/// Applies eval-mode SeBN in place to double pre-activations laid out (t, k, plane).
template <class Real>
void sebn_apply_eval(std::span<double> z, const Shape& s, const BasicSeBN<Real>& layer) {
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t k = 0; k < s.c; ++k) {
      const std::size_t g = layer.idx(t, k);
      const double d = layer.denom(static_cast<double>(layer.run_var[g]));
      const double mu = static_cast<double>(layer.run_mean[g]);
      const double gm = static_cast<double>(layer.gamma[g]);
      const double bt = static_cast<double>(layer.beta[g]);
      double* p = z.data() + (t * s.c + k) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] = gm * ((p[i] - mu) / d) + bt;
    }
  }
}

/// Eval-mode SeBN using the running statistics.
template <class Real>
Tensor<Real> sebn_forward_eval(const Tensor<Real>& x, const BasicSeBN<Real>& layer) {
  layer.validate();
  if (!layer.stats_ready) fail(ErrorKind::Config, "SeBN running statistics were never populated");
  layer.check_input(x.shape());
  std::vector<double> z(x.data().begin(), x.data().end());
  sebn_apply_eval<Real>(z, x.shape(), layer);
  return Tensor<Real>(x.shape(), std::vector<Real>(z.begin(), z.end()));
}

template <class Real>
struct SeBNGrads {
  Batch<Real> grad_x;
  std::vector<Real> grad_gamma;  // [t][k]
  std::vector<Real> grad_beta;   // [t][k]
};

/// Exact gradients of training-mode SeBN, with the batch moments treated as
/// functions of the input.
template <class Real>
SeBNGrads<Real> sebn_backward(const Batch<Real>& grad_out, const SeBNCache<Real>& cache,
                              const BasicSeBN<Real>& layer) {
  if (!cache.valid) fail(ErrorKind::Config, "sebn_backward called without a forward cache");
  if (grad_out.size() != cache.input.size()) fail(ErrorKind::Shape, "gradient batch size mismatch");
  const Shape& s = cache.input.front().shape();
  for (const auto& g : grad_out) {
    if (g.shape() != s) fail(ErrorKind::Shape, "gradient shape mismatch");
  }
  const double count = static_cast<double>(cache.input.size() * s.plane());
  SeBNGrads<Real> out;
  out.grad_gamma.assign(s.t * s.c, Real(0));
  out.grad_beta.assign(s.t * s.c, Real(0));
  for (std::size_t i = 0; i < grad_out.size(); ++i) out.grad_x.emplace_back(s);

  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t k = 0; k < s.c; ++k) {
      const std::size_t g = layer.idx(t, k);
      const double mu = cache.mean[g];
      const double rstd = 1.0 / std::sqrt(cache.var[g] + layer.eps);
      // y = gamma * xt / sqrt(n) + beta, with xt = (x - mu) * rstd
      double sum_g = 0.0;
      double sum_g_xt = 0.0;
      for (std::size_t b = 0; b < grad_out.size(); ++b) {
        auto gx = grad_out[b].plane(t, k);
        auto xx = cache.input[b].plane(t, k);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const double go = static_cast<double>(gx[i]);
          sum_g += go;
          sum_g_xt += go * (static_cast<double>(xx[i]) - mu) * rstd;
        }
      }
      const double sqrt_n = std::sqrt(static_cast<double>(layer.n));
      out.grad_beta[g] = static_cast<Real>(sum_g);
      out.grad_gamma[g] = static_cast<Real>(sum_g_xt / sqrt_n);
      const double scale = static_cast<double>(layer.gamma[g]) * rstd / sqrt_n;
      const double mean_g = sum_g / count;
      const double mean_g_xt = sum_g_xt / count;
      for (std::size_t b = 0; b < grad_out.size(); ++b) {
        auto gx = grad_out[b].plane(t, k);
        auto xx = cache.input[b].plane(t, k);
        auto dst = out.grad_x[b].plane(t, k);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const double xt = (static_cast<double>(xx[i]) - mu) * rstd;
          dst[i] = static_cast<Real>(scale * (static_cast<double>(gx[i]) - mean_g - xt * mean_g_xt));
        }
      }
    }
  }
  return out;
}

/// T per-step convolutions that replace a shared-weight conv followed by eval SeBN.
template <class Real>
struct BasicFusedConv {
  std::vector<BasicConv<Real>> steps;
};

using FusedConv = BasicFusedConv<float>;

/// Folds eval-mode SeBN into the preceding convolution, one weight set per step:
///   W'[t,k] = gamma[t,k] * W[k] / sqrt(n (var[t,k] + eps))
///   B'[t,k] = gamma[t,k] * (B[k] - mean[t,k]) / sqrt(n (var[t,k] + eps)) + beta[t,k]
template <class Real>
BasicFusedConv<Real> fuse(const BasicConv<Real>& conv, const BasicSeBN<Real>& layer) {
  conv.validate();
  layer.validate();
  if (!layer.stats_ready) fail(ErrorKind::Config, "cannot fuse SeBN without running statistics");
  if (conv.out_ch != layer.channels) {
    fail(ErrorKind::Shape, "conv has " + std::to_string(conv.out_ch) + " outputs but SeBN has " +
                               std::to_string(layer.channels) + " channels");
  }
  const std::size_t per_out = conv.in_ch * conv.k_h * conv.k_w;
  BasicFusedConv<Real> fused;
  fused.steps.reserve(layer.t_steps);
  for (std::size_t t = 0; t < layer.t_steps; ++t) {
    BasicConv<Real> step = conv;
    for (std::size_t k = 0; k < conv.out_ch; ++k) {
      const std::size_t g = layer.idx(t, k);
      const double d = layer.denom(static_cast<double>(layer.run_var[g]));
      const double gm = static_cast<double>(layer.gamma[g]);
      for (std::size_t j = 0; j < per_out; ++j) {
        step.weight[k * per_out + j] =
            static_cast<Real>(gm * (static_cast<double>(conv.weight[k * per_out + j]) / d));
      }
      step.bias[k] = static_cast<Real>(
          gm * ((static_cast<double>(conv.bias[k]) - static_cast<double>(layer.run_mean[g])) / d) +
          static_cast<double>(layer.beta[g]));
    }
    fused.steps.push_back(std::move(step));
  }
  return fused;
}

/// Eval-mode conventional BN in place on double pre-activations (t, k, plane).
template <class Real>
void bn_apply_eval(std::span<double> z, const Shape& s, const BasicBatchNorm<Real>& bn) {
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t k = 0; k < s.c; ++k) {
      const double d = std::sqrt(static_cast<double>(bn.run_var[k]) + bn.eps);
      const double mu = static_cast<double>(bn.run_mean[k]);
      const double gm = static_cast<double>(bn.gamma[k]);
      const double bt = static_cast<double>(bn.beta[k]);
      double* p = z.data() + (t * s.c + k) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] = gm * ((p[i] - mu) / d) + bt;
    }
  }
}

template <class Real>
Tensor<Real> bn_forward_eval(const Tensor<Real>& x, const BasicBatchNorm<Real>& bn) {
  bn.validate();
  if (!bn.stats_ready) fail(ErrorKind::Config, "BN running statistics were never populated");
  if (x.shape().c != bn.channels) fail(ErrorKind::Shape, "BN channel mismatch");
  std::vector<double> z(x.data().begin(), x.data().end());
  bn_apply_eval<Real>(z, x.shape(), bn);
  return Tensor<Real>(x.shape(), std::vector<Real>(z.begin(), z.end()));
}

/// Training-mode BN; statistics per channel pooled over batch, time and space.
template <class Real>
Batch<Real> bn_forward_train(const Batch<Real>& batch, BasicBatchNorm<Real>& bn,
                             bool update_stats = true) {
  bn.validate();
  detail::check_batch(batch, 2);
  const Shape& s = batch.front().shape();
  if (s.c != bn.channels) fail(ErrorKind::Shape, "BN channel mismatch");
  const double count = static_cast<double>(batch.size() * s.t * s.plane());
  std::vector<double> mean(s.c, 0.0);
  std::vector<double> var(s.c, 0.0);
  for (std::size_t k = 0; k < s.c; ++k) {
    double sum = 0.0;
    for (const auto& x : batch)
      for (std::size_t t = 0; t < s.t; ++t)
        for (Real v : x.plane(t, k)) sum += static_cast<double>(v);
    mean[k] = sum / count;
    double sq = 0.0;
    for (const auto& x : batch)
      for (std::size_t t = 0; t < s.t; ++t)
        for (Real v : x.plane(t, k)) sq += (static_cast<double>(v) - mean[k]) * (static_cast<double>(v) - mean[k]);
    var[k] = sq / count;
  }
  Batch<Real> out;
  for (const auto& x : batch) {
    Tensor<Real> y(s);
    for (std::size_t t = 0; t < s.t; ++t) {
      for (std::size_t k = 0; k < s.c; ++k) {
        const double d = std::sqrt(var[k] + bn.eps);
        auto src = x.plane(t, k);
        auto dst = y.plane(t, k);
        for (std::size_t i = 0; i < src.size(); ++i) {
          dst[i] = static_cast<Real>(static_cast<double>(bn.gamma[k]) *
                                         ((static_cast<double>(src[i]) - mean[k]) / d) +
                                     static_cast<double>(bn.beta[k]));
        }
      }
    }
    out.push_back(std::move(y));
  }
  if (update_stats) {
    for (std::size_t k = 0; k < s.c; ++k) {
      bn.run_mean[k] = static_cast<Real>((1.0 - bn.momentum) * bn.run_mean[k] + bn.momentum * mean[k]);
      bn.run_var[k] = static_cast<Real>((1.0 - bn.momentum) * bn.run_var[k] + bn.momentum * var[k]);
    }
    bn.stats_ready = true;
  }
  return out;
}

/// Folds eval-mode BN into the preceding convolution.
template <class Real>
BasicConv<Real> bn_fuse(const BasicConv<Real>& conv, const BasicBatchNorm<Real>& bn) {
  conv.validate();
  bn.validate();
  if (!bn.stats_ready) fail(ErrorKind::Config, "cannot fuse BN without running statistics");
  if (conv.out_ch != bn.channels) fail(ErrorKind::Shape, "conv outputs and BN channels differ");
  BasicConv<Real> out = conv;
  const std::size_t per_out = conv.in_ch * conv.k_h * conv.k_w;
  for (std::size_t k = 0; k < conv.out_ch; ++k) {
    const double d = std::sqrt(static_cast<double>(bn.run_var[k]) + bn.eps);
    const double gm = static_cast<double>(bn.gamma[k]);
    for (std::size_t j = 0; j < per_out; ++j) {
      out.weight[k * per_out + j] = static_cast<Real>(gm * (static_cast<double>(conv.weight[k * per_out + j]) / d));
    }
    out.bias[k] = static_cast<Real>(
        gm * ((static_cast<double>(conv.bias[k]) - static_cast<double>(bn.run_mean[k])) / d) +
        static_cast<double>(bn.beta[k]));
  }
  return out;
}

}  // namespace spikedet

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "spikedet/conv.hpp"
#include "spikedet/error.hpp"
#include "spikedet/neuron.hpp"
#include "spikedet/normalization.hpp"
#include "spikedet/tensor.hpp"
#include "spikedet/trace.hpp"

namespace spikedet {

/// Per-run execution state shared by all layers of one forward pass.
struct ForwardContext {
  NeuronConfig neuron;
  Trace* trace = nullptr;
  const EdgeObserver* observer = nullptr;
  bool check_spikes = false;
  std::function<void(const std::string&)> warn = [](const std::string& msg) {
    std::clog << "warning: " << msg << '\n';
  };

  void spike_edge(const std::string& name, const SpikeTensor& x) const {
    if (check_spikes) validate_binary(x.data());
    if (observer && *observer) (*observer)(name, &x, nullptr);
  }

  void float_edge(const std::string& name, const FloatTensor& x) const {
    if (observer && *observer) (*observer)(name, nullptr, &x);
  }

  /// IF over all steps of `membrane_input`, traced under `name`.
  SpikeTensor fire(const std::string& name, const FloatTensor& membrane_input) const {
    SpikeTensor s = if_run(membrane_input, neuron);
    if (trace) {
      FireRecord rec{name, s.shape().step(), {}};
      for (std::size_t t = 0; t < s.shape().t; ++t) {
        std::uint64_t n = 0;
        for (std::uint8_t v : s.step(t)) n += v;
        rec.spikes.push_back(n);
      }
      trace->fires.push_back(std::move(rec));
    }
    spike_edge(name, s);
    return s;
  }
};

enum class NormKind { None, BatchNorm, SeBN };

/// A convolution with its optional normalization, or the folded equivalent.
struct ConvUnit {
  std::string name;
  ConvLayer conv;
  NormKind norm = NormKind::None;
  SeBNLayer sebn;
  BatchNormLayer bn;
  std::vector<ConvLayer> fused;  // one set (BN) or one per step (SeBN) once folded

  bool is_fused() const { return !fused.empty(); }

  std::size_t parameter_count() const {
    if (is_fused()) {
      std::size_t n = 0;
      for (const auto& c : fused) n += c.parameter_count();
      return n;
    }
    std::size_t n = conv.parameter_count();
    if (norm == NormKind::SeBN) n += sebn.parameter_count();
    if (norm == NormKind::BatchNorm) n += bn.parameter_count();
    return n;
  }

  /// Replaces conv + norm by the folded per-step weights.
  void fold() {
    if (is_fused()) fail(ErrorKind::Config, "unit '" + name + "' is already fused");
    if (norm == NormKind::SeBN) {
      fused = fuse(conv, sebn).steps;
    } else if (norm == NormKind::BatchNorm) {
      fused = {bn_fuse(conv, bn)};
    } else {
      fused = {conv};
    }
  }

  const ConvLayer& geometry() const { return is_fused() ? fused.front() : conv; }

  FloatTensor forward(const SpikeTensor& x, const ForwardContext& ctx) const {
    const Shape& s = x.shape();
    if (is_fused() && fused.size() != 1 && fused.size() != s.t) {
      fail(ErrorKind::Shape, "unit '" + name + "' was fused for " + std::to_string(fused.size()) +
                                 " steps but the input has " + std::to_string(s.t));
    }
    ConvCounters counters;
    Shape os;
    std::vector<double> z =
        is_fused()
            ? spike_conv_accumulate<float>(x, fused, &os, ctx.trace ? &counters : nullptr)
            : spike_conv_accumulate<float>(x, std::span<const ConvLayer>(&conv, 1), &os,
                                           ctx.trace ? &counters : nullptr);
    if (!is_fused()) apply_norm(z, os);
    if (ctx.trace) {
      const ConvLayer& g = geometry();
      ctx.trace->convs.push_back(ConvRecord{name, ConvInput::Spike, g.in_ch, g.out_ch, g.k_h, g.k_w,
                                            os.h, os.w, s.t, counters.input_neurons,
                                            std::move(counters.input_spikes),
                                            std::move(counters.accumulations), parameter_count()});
    }
    return FloatTensor(os, std::vector<float>(z.begin(), z.end()));
  }

  /// Real-valued input (the encoder path); billed as FLOPs.
  FloatTensor forward_dense(const FloatTensor& x, const ForwardContext& ctx) const {
    const Shape& s = x.shape();
    const Shape os = geometry().output_shape(s);
    std::vector<double> z(os.numel());
    for (std::size_t t = 0; t < s.t; ++t) {
      const ConvLayer& c = is_fused() ? fused[fused.size() == 1 ? 0 : t] : conv;
      c.validate();
      detail::dense_step<float, float>(x.step(t), s.h, s.w, c, os.h, os.w,
                                       std::span<double>(z).subspan(t * os.step(), os.step()));
    }
    if (!is_fused()) apply_norm(z, os);
    if (ctx.trace) {
      const ConvLayer& g = geometry();
      ctx.trace->convs.push_back(ConvRecord{name, ConvInput::Float, g.in_ch, g.out_ch, g.k_h, g.k_w,
                                            os.h, os.w, s.t, s.step(), {}, {}, parameter_count()});
    }
    return FloatTensor(os, std::vector<float>(z.begin(), z.end()));
  }

 private:
  void apply_norm(std::vector<double>& z, const Shape& os) const {
    if (norm == NormKind::SeBN) {
      if (!sebn.stats_ready) fail(ErrorKind::Config, "SeBN '" + name + "' has no running statistics");
      sebn.check_input(os);
      sebn_apply_eval<float>(z, os, sebn);
    } else if (norm == NormKind::BatchNorm) {
      if (!bn.stats_ready) fail(ErrorKind::Config, "BN '" + name + "' has no running statistics");
      bn_apply_eval<float>(z, os, bn);
    }
  }
};

namespace detail {

inline FloatTensor add(const FloatTensor& a, const FloatTensor& b, const std::string& where) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Shape, where + ": residual summands " + a.shape().str() + " and " + b.shape().str());
  }
  FloatTensor out(a.shape());
  auto pa = a.data();
  auto pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + pb[i];
  return out;
}

inline std::size_t half_channels(const FloatTensor& y, const std::string& where) {
  if (y.shape().c % 2 != 0) {
    fail(ErrorKind::Shape, where + ": cannot split " + std::to_string(y.shape().c) + " channels evenly");
  }
  return y.shape().c / 2;
}

}  // namespace detail

/// CSP residual block with downsampling:
///   X1, X2 = split(conv_a(x));  out = IF(concat(X1, conv_b(IF(X2)) + shortcut(x)))
struct SuBlock1 {
  ConvUnit conv_a;    // in -> out, strided
  ConvUnit conv_b;    // out/2 -> out/2
  ConvUnit shortcut;  // in -> out/2, strided like conv_a
};

inline SpikeTensor sublock1(const SpikeTensor& x, const SuBlock1& p, const ForwardContext& ctx,
                            const std::string& name) {
  FloatTensor y = p.conv_a.forward(x, ctx);
  auto [x1, x2] = split_channels(y, detail::half_channels(y, name));
  SpikeTensor s2 = ctx.fire(name + ".if_x2", x2);
  FloatTensor b = p.conv_b.forward(s2, ctx);
  FloatTensor sc = p.shortcut.forward(x, ctx);
  FloatTensor sum = detail::add(b, sc, name);
  return ctx.fire(name + ".if_out", concat_channels(x1, sum));
}

/// CSP block without downsampling or shortcut:
///   X1, X2 = split(conv_a(x));  out = IF(concat(X1, conv_b(IF(X2))))
struct SuBlock2 {
  ConvUnit conv_a;
  ConvUnit conv_b;
};

inline SpikeTensor sublock2(const SpikeTensor& x, const SuBlock2& p, const ForwardContext& ctx,
                            const std::string& name) {
  FloatTensor y = p.conv_a.forward(x, ctx);
  auto [x1, x2] = split_channels(y, detail::half_channels(y, name));
  SpikeTensor s2 = ctx.fire(name + ".if_x2", x2);
  FloatTensor b = p.conv_b.forward(s2, ctx);
  return ctx.fire(name + ".if_out", concat_channels(x1, b));
}

/// Spatial pyramid pooling on membrane inputs: two chained max-pools of the
/// conv output, concatenated with it, fired, projected and fired again.
struct SpikeSpp {
  ConvUnit conv_in;
  ConvUnit conv_out;  // 3 * mid -> out
  std::size_t pool_k = 5;
  std::size_t pool_pad = 2;
};

inline SpikeTensor spike_spp(const SpikeTensor& x, const SpikeSpp& p, const ForwardContext& ctx,
                             const std::string& name) {
  FloatTensor x1 = p.conv_in.forward(x, ctx);
  FloatTensor x2 = max_pool(x1, p.pool_k, 1, p.pool_pad);
  FloatTensor x3 = max_pool(x2, p.pool_k, 1, p.pool_pad);
  if (x2.shape() != x1.shape()) fail(ErrorKind::Config, name + ": pooling must preserve the map size");
  const FloatTensor* parts[] = {&x1, &x2, &x3};
  SpikeTensor s = ctx.fire(name + ".if_cat", concat_channels<float>(parts));
  FloatTensor y = p.conv_out.forward(s, ctx);
  return ctx.fire(name + ".if_out", y);
}

/// Max-pool the membrane input, then fire (the order SpikeSpp uses).
inline SpikeTensor pool_then_fire(const FloatTensor& v, std::size_t k, std::size_t stride, std::size_t pad,
                                  const NeuronConfig& cfg = {}) {
  return if_run(max_pool(v, k, stride, pad), cfg);
}

/// Fire, then max-pool the spikes.
inline SpikeTensor fire_then_pool(const FloatTensor& v, std::size_t k, std::size_t stride, std::size_t pad,
                                  const NeuronConfig& cfg = {}) {
  return max_pool(if_run(v, cfg), k, stride, pad);
}

/// A two-step 2x2 membrane input where the orders disagree under a 2x2 pool.
/// Neuron a sees 0.9 then 0, neuron b sees 0 then 0.9; neither fires alone,
/// but the pooled neuron sees 0.9 twice and fires at t = 1.
inline FloatTensor pool_order_counterexample() {
  return FloatTensor(Shape{2, 1, 2, 2}, {0.9f, 0.0f, 0.0f, 0.0f,  //
                                         0.0f, 0.9f, 0.0f, 0.0f});
}

/// Conv + conventional BN on the image, repeated over T steps and fired.
struct Encoder {
  ConvUnit conv;
};

inline SpikeTensor encoder(const FloatTensor& image, const Encoder& p, std::size_t t_steps,
                           const ForwardContext& ctx, const std::string& name) {
  if (image.shape().t != 1) fail(ErrorKind::Shape, "encoder expects a single image (t = 1)");
  if (t_steps == 0) fail(ErrorKind::Config, "time steps must be >= 1");
  FloatTensor img = image;
  std::size_t clamped = 0;
  for (float& v : img.data()) {
    if (std::isnan(v)) fail(ErrorKind::Validation, "input image contains NaN");
    if (v < 0.0f || v > 1.0f) {
      v = std::clamp(v, 0.0f, 1.0f);
      ++clamped;
    }
  }
  if (clamped > 0 && ctx.warn) {
    ctx.warn(std::to_string(clamped) + " input values outside [0,1] were clamped");
  }
  FloatTensor z = p.conv.forward_dense(img, ctx);
  return ctx.fire(name, z.repeat_time(t_steps));
}

/// One prediction branch: hidden conv, IF, output conv, infinite-threshold readout.
struct DetectBranch {
  ConvUnit hidden;
  ConvUnit out;
};

struct DetectScale {
  DetectBranch box;
  DetectBranch cls;
};

struct DetectHead {
  std::vector<DetectScale> scales;
};

namespace detail {

inline FloatTensor run_branch(const SpikeTensor& x, const DetectBranch& b, const ForwardContext& ctx,
                              const std::string& name) {
  SpikeTensor h = ctx.fire(name + ".if", b.hidden.forward(x, ctx));
  FloatTensor o = b.out.forward(h, ctx);
  FloatTensor acc = accumulate_run(o);
  if (ctx.trace) ctx.trace->accumulates.push_back({name + ".acc", static_cast<std::uint64_t>(o.size())});
  ctx.float_edge(name + ".acc", acc);
  return acc;
}

}  // namespace detail

/// Decoupled head: per scale, box and class branches read out as accumulated
/// membrane potentials (t = 1), concatenated as [box | class] channels.
inline std::vector<FloatTensor> detect_head(std::span<const SpikeTensor* const> features, const DetectHead& p,
                                            const ForwardContext& ctx, const std::string& name) {
  if (features.size() != p.scales.size() || features.size() != 2) {
    fail(ErrorKind::Config, name + ": detect head takes exactly two feature scales, got " +
                                std::to_string(features.size()));
  }
  std::vector<FloatTensor> out;
  for (std::size_t s = 0; s < features.size(); ++s) {
    const std::string prefix = name + ".p" + std::to_string(s);
    FloatTensor box = detail::run_branch(*features[s], p.scales[s].box, ctx, prefix + ".box");
    FloatTensor cls = detail::run_branch(*features[s], p.scales[s].cls, ctx, prefix + ".cls");
    out.push_back(concat_channels(box, cls));
  }
  return out;
}

}  // namespace spikedet

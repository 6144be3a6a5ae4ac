#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

/// 2-D convolution parameters, weights laid out (out, in, k_h, k_w).
template <class Real>
struct BasicConv {
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  std::size_t k_h = 1;
  std::size_t k_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::vector<Real> weight;
  std::vector<Real> bias;

  static BasicConv make(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1,
                        std::size_t pad = 0) {
    BasicConv conv{in, out, k, k, stride, pad, {}, {}};
    conv.weight.assign(out * in * k * k, Real(0));
    conv.bias.assign(out, Real(0));
    return conv;
  }

  std::size_t weight_index(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const {
    return ((o * in_ch + c) * k_h + ky) * k_w + kx;
  }

  Real& w(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) {
    return weight[weight_index(o, c, ky, kx)];
  }
  const Real& w(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const {
    return weight[weight_index(o, c, ky, kx)];
  }

  std::size_t out_extent(std::size_t in, std::size_t k) const {
    if (in + 2 * pad < k) {
      fail(ErrorKind::Shape, "kernel " + std::to_string(k) + " larger than padded input " +
                                 std::to_string(in + 2 * pad));
    }
    return (in + 2 * pad - k) / stride + 1;
  }

  /// Output shape for input `s` (t and batch-free layout preserved).
  Shape output_shape(const Shape& s) const {
    if (s.c != in_ch) {
      fail(ErrorKind::Shape, "conv expects " + std::to_string(in_ch) + " input channels, got " +
                                 std::to_string(s.c));
    }
    return Shape{s.t, out_ch, out_extent(s.h, k_h), out_extent(s.w, k_w)};
  }

  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  void validate() const {
    if (in_ch == 0 || out_ch == 0 || k_h == 0 || k_w == 0 || stride == 0) {
      fail(ErrorKind::Config, "conv extents and stride must be positive");
    }
    if (weight.size() != out_ch * in_ch * k_h * k_w || bias.size() != out_ch) {
      fail(ErrorKind::Weights, "conv parameter arrays do not match its geometry");
    }
  }
};

using ConvLayer = BasicConv<float>;

/// Per-call instrumentation of a convolution over T steps.
struct ConvCounters {
  std::vector<std::uint64_t> accumulations;  // per step, bias additions included
  std::vector<std::uint64_t> input_spikes;   // per step
  std::uint64_t input_neurons = 0;           // per step (c * h * w)
};

namespace detail {

// Weights re-laid as [c][ky][kx][o] so an input event adds one contiguous row.
struct PackedConv {
  std::size_t in_ch, out_ch, k_h, k_w, stride, pad;
  std::vector<double> rows;
  std::vector<double> bias;
};

template <class Real>
PackedConv pack(const BasicConv<Real>& conv) {
  PackedConv p{conv.in_ch, conv.out_ch, conv.k_h, conv.k_w, conv.stride, conv.pad, {}, {}};
  p.rows.resize(conv.weight.size());
  for (std::size_t o = 0; o < conv.out_ch; ++o)
    for (std::size_t c = 0; c < conv.in_ch; ++c)
      for (std::size_t ky = 0; ky < conv.k_h; ++ky)
        for (std::size_t kx = 0; kx < conv.k_w; ++kx)
          p.rows[((c * conv.k_h + ky) * conv.k_w + kx) * conv.out_ch + o] = conv.w(o, c, ky, kx);
  p.bias.assign(conv.bias.begin(), conv.bias.end());
  return p;
}

// Event-driven accumulation for one time step. `in` is c*h*w spikes; the result
// is out_ch*ho*wo channel-major sums. For each output the additions happen in
// (c, ky, kx) order, the same order as a dense gather, so results are identical.
inline std::uint64_t spike_step(std::span<const std::uint8_t> in, std::size_t h, std::size_t w,
                                const PackedConv& p, std::size_t ho, std::size_t wo,
                                std::vector<double>& scratch, std::span<double> out) {
  const std::size_t co = p.out_ch;
  scratch.resize(ho * wo * co);
  for (std::size_t i = 0; i < ho * wo; ++i)
    std::copy(p.bias.begin(), p.bias.end(), scratch.begin() + static_cast<std::ptrdiff_t>(i * co));
  std::uint64_t adds = static_cast<std::uint64_t>(ho * wo * co);
  const auto s = static_cast<std::ptrdiff_t>(p.stride);
  const auto pad = static_cast<std::ptrdiff_t>(p.pad);
  for (std::size_t c = 0; c < p.in_ch; ++c) {
    const std::uint8_t* plane = in.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (!plane[y * w + x]) continue;
        for (std::size_t ky = 0; ky < p.k_h; ++ky) {
          const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + pad - static_cast<std::ptrdiff_t>(ky);
          if (ny < 0 || ny % s != 0) continue;
          const std::size_t oy = static_cast<std::size_t>(ny / s);
          if (oy >= ho) continue;
          for (std::size_t kx = 0; kx < p.k_w; ++kx) {
            const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + pad - static_cast<std::ptrdiff_t>(kx);
            if (nx < 0 || nx % s != 0) continue;
            const std::size_t ox = static_cast<std::size_t>(nx / s);
            if (ox >= wo) continue;
            const double* row = p.rows.data() + ((c * p.k_h + ky) * p.k_w + kx) * co;
            double* acc = scratch.data() + (oy * wo + ox) * co;
            for (std::size_t o = 0; o < co; ++o) acc[o] += row[o];
            adds += co;
          }
        }
      }
    }
  }
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < ho * wo; ++i) out[o * ho * wo + i] = scratch[i * co + o];
  return adds;
}

// Dense gather for one step of real-valued input, accumulating in double in
// (c, ky, kx) order after the bias.
template <class In, class Real>
void dense_step(std::span<const In> in, std::size_t h, std::size_t w, const BasicConv<Real>& conv,
                std::size_t ho, std::size_t wo, std::span<double> out) {
  const auto pad = static_cast<std::ptrdiff_t>(conv.pad);
  for (std::size_t o = 0; o < conv.out_ch; ++o) {
    double* acc = out.data() + o * ho * wo;
    std::fill(acc, acc + ho * wo, static_cast<double>(conv.bias[o]));
    for (std::size_t c = 0; c < conv.in_ch; ++c) {
      const In* plane = in.data() + c * h * w;
      for (std::size_t ky = 0; ky < conv.k_h; ++ky) {
        for (std::size_t kx = 0; kx < conv.k_w; ++kx) {
          const double wv = static_cast<double>(conv.w(o, c, ky, kx));
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * conv.stride) - pad +
                                      static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const In* row = plane + static_cast<std::size_t>(iy) * w;
            double* arow = acc + oy * wo;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * conv.stride) - pad +
                                        static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              arow[ox] += wv * static_cast<double>(row[ix]);
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Double-precision pre-activation of a spike-input conv, one weight set per step
/// (a single set is shared across all steps). Result is (t, out, ho, wo) flat.
template <class Real>
std::vector<double> spike_conv_accumulate(const SpikeTensor& x,
                                          std::span<const BasicConv<Real>> per_step,
                                          Shape* out_shape = nullptr,
                                          ConvCounters* counters = nullptr) {
  const Shape& s = x.shape();
  if (per_step.empty() || (per_step.size() != 1 && per_step.size() != s.t)) {
    fail(ErrorKind::Shape, "spike conv needs one weight set or one per time step");
  }
  const Shape os = per_step.front().output_shape(s);
  for (const auto& conv : per_step) {
    conv.validate();
    if (conv.output_shape(s) != os) fail(ErrorKind::Shape, "per-step conv geometries differ");
  }
  std::vector<detail::PackedConv> packed;
  packed.reserve(per_step.size());
  for (const auto& conv : per_step) packed.push_back(detail::pack(conv));

  std::vector<double> out(os.numel());
  std::vector<double> scratch;
  if (counters) {
    counters->accumulations.assign(s.t, 0);
    counters->input_spikes.assign(s.t, 0);
    counters->input_neurons = s.step();
  }
  for (std::size_t t = 0; t < s.t; ++t) {
    const auto& p = packed[per_step.size() == 1 ? 0 : t];
    const std::uint64_t adds =
        detail::spike_step(x.step(t), s.h, s.w, p, os.h, os.w, scratch,
                           std::span<double>(out).subspan(t * os.step(), os.step()));
    if (counters) {
      counters->accumulations[t] = adds;
      std::uint64_t ones = 0;
      for (std::uint8_t v : x.step(t)) ones += v;
      counters->input_spikes[t] = ones;
    }
  }
  if (out_shape) *out_shape = os;
  return out;
}

/// Spiking convolution: multiplication degenerates to accumulating the weights
/// of active inputs.
inline FloatTensor spike_conv(const SpikeTensor& x, const ConvLayer& conv,
                              ConvCounters* counters = nullptr) {
  validate_binary(x.data());
  Shape os;
  std::vector<double> acc =
      spike_conv_accumulate<float>(x, std::span<const ConvLayer>(&conv, 1), &os, counters);
  std::vector<float> data(acc.begin(), acc.end());
  return FloatTensor(os, std::move(data));
}

/// Dense real-valued convolution (double accumulation), result in `Out`.
template <class Out, class In, class Real>
Tensor<Out> conv2d(const Tensor<In>& x, const BasicConv<Real>& conv) {
  conv.validate();
  const Shape& s = x.shape();
  const Shape os = conv.output_shape(s);
  std::vector<double> acc(os.step());
  std::vector<Out> data(os.numel());
  for (std::size_t t = 0; t < s.t; ++t) {
    detail::dense_step<In, Real>(x.step(t), s.h, s.w, conv, os.h, os.w, acc);
    std::transform(acc.begin(), acc.end(), data.begin() + static_cast<std::ptrdiff_t>(t * os.step()),
                   [](double v) { return static_cast<Out>(v); });
  }
  return Tensor<Out>(os, std::move(data));
}

template <class Real>
struct ConvGrads {
  Tensor<Real> grad_x;
  std::vector<Real> grad_weight;
  std::vector<Real> grad_bias;
};

/// Exact gradients of conv2d, summed over all time steps.
template <class Real>
ConvGrads<Real> conv2d_backward(const Tensor<Real>& x, const BasicConv<Real>& conv,
                                const Tensor<Real>& grad_out) {
  const Shape& s = x.shape();
  const Shape os = conv.output_shape(s);
  if (grad_out.shape() != os) fail(ErrorKind::Shape, "conv2d_backward: gradient shape mismatch");
  ConvGrads<Real> g{Tensor<Real>(s), std::vector<Real>(conv.weight.size(), Real(0)),
                    std::vector<Real>(conv.out_ch, Real(0))};
  const auto pad = static_cast<std::ptrdiff_t>(conv.pad);
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t o = 0; o < conv.out_ch; ++o) {
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          const Real go = grad_out(t, o, oy, ox);
          g.grad_bias[o] += go;
          for (std::size_t c = 0; c < conv.in_ch; ++c) {
            for (std::size_t ky = 0; ky < conv.k_h; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * conv.stride) - pad +
                                        static_cast<std::ptrdiff_t>(ky);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.h)) continue;
              for (std::size_t kx = 0; kx < conv.k_w; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * conv.stride) - pad +
                                          static_cast<std::ptrdiff_t>(kx);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.w)) continue;
                const auto yy = static_cast<std::size_t>(iy);
                const auto xx = static_cast<std::size_t>(ix);
                g.grad_weight[conv.weight_index(o, c, ky, kx)] += go * x(t, c, yy, xx);
                g.grad_x(t, c, yy, xx) += go * conv.w(o, c, ky, kx);
              }
            }
          }
        }
      }
    }
  }
  return g;
}

/// Max pooling per (t, c) plane; padded cells never win.
template <class V>
Tensor<V> max_pool(const Tensor<V>& x, std::size_t k, std::size_t stride, std::size_t pad) {
  const Shape& s = x.shape();
  if (k == 0 || stride == 0) fail(ErrorKind::Config, "pool window and stride must be positive");
  if (k > s.h || k > s.w) {
    fail(ErrorKind::Shape, "pool window " + std::to_string(k) + " larger than feature map " +
                               std::to_string(s.h) + "x" + std::to_string(s.w));
  }
  if (pad >= k) fail(ErrorKind::Config, "pool padding must be smaller than the window");
  const std::size_t ho = (s.h + 2 * pad - k) / stride + 1;
  const std::size_t wo = (s.w + 2 * pad - k) / stride + 1;
  Tensor<V> out(Shape{s.t, s.c, ho, wo});
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = x.plane(t, c);
      auto dst = out.plane(t, c);
      for (std::size_t oy = 0; oy < ho; ++oy) {
        const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * stride) - p;
        const std::size_t ya = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
        const std::size_t yb = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(s.h)));
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * stride) - p;
          const std::size_t xa = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
          const std::size_t xb = static_cast<std::size_t>(
              std::min<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(s.w)));
          V best = std::numeric_limits<V>::lowest();
          for (std::size_t y = ya; y < yb; ++y)
            for (std::size_t xx = xa; xx < xb; ++xx) best = std::max(best, src[y * s.w + xx]);
          dst[oy * wo + ox] = best;
        }
      }
    }
  }
  return out;
}

/// Nearest-neighbour upsampling by an integer factor.
template <class V>
Tensor<V> upsample_nearest(const Tensor<V>& x, std::size_t factor) {
  if (factor == 0) fail(ErrorKind::Config, "upsample factor must be positive");
  const Shape& s = x.shape();
  Tensor<V> out(Shape{s.t, s.c, s.h * factor, s.w * factor});
  const std::size_t wo = s.w * factor;
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = x.plane(t, c);
      auto dst = out.plane(t, c);
      for (std::size_t y = 0; y < s.h * factor; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) dst[y * wo + xx] = src[(y / factor) * s.w + xx / factor];
    }
  }
  return out;
}

}  // namespace spikedet

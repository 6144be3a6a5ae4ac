#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

/// The three fixed 3x3 integer kernels, applied in order K1, K2, K3.
/// K1/K2 fill a 0 surrounded by 1s (cross / diagonal neighbours); K3 removes
/// an isolated 1.
enum class DenoiseKernel { K1, K2, K3 };

using Kernel3x3 = std::array<std::array<int, 3>, 3>;

constexpr Kernel3x3 kernel_matrix(DenoiseKernel k) {
  switch (k) {
    case DenoiseKernel::K1: return {{{0, 1, 0}, {1, -1, 1}, {0, 1, 0}}};
    case DenoiseKernel::K2: return {{{1, 0, 1}, {0, -1, 0}, {1, 0, 1}}};
    case DenoiseKernel::K3: return {{{-1, -1, -1}, {-1, 4, -1}, {-1, -1, -1}}};
  }
  return {};
}

inline constexpr std::array<DenoiseKernel, 3> kDenoiseOrder = {DenoiseKernel::K1, DenoiseKernel::K2,
                                                                DenoiseKernel::K3};

enum class DenoiseDownsample { None, MaxPool2 };

struct DenoiseConfig {
  int flip_threshold = 4;
  DenoiseDownsample downsample = DenoiseDownsample::None;

  void validate() const {
    if (flip_threshold != 4) fail(ErrorKind::Config, "denoiser flip threshold is fixed at 4");
  }
};

/// Integer additions performed, per kernel pass. An addition is billed for every
/// in-bounds tap where the input is 1 and the coefficient is nonzero.
struct DenoiseCost {
  std::array<std::uint64_t, 3> pass_adds{};
  std::uint64_t total() const { return pass_adds[0] + pass_adds[1] + pass_adds[2]; }
};

namespace detail {

// One pass over an h x w plane with zero padding. Reads only `in`.
inline std::uint64_t denoise_plane(std::span<const std::uint8_t> in, std::span<std::uint8_t> out,
                                   std::size_t h, std::size_t w, const Kernel3x3& k,
                                   int threshold) {
  std::uint64_t adds = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      int acc = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
        const std::uint8_t* row = in.data() + static_cast<std::size_t>(yy) * w;
        for (int dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
          const int coeff = k[dy + 1][dx + 1];
          if (row[xx] && coeff != 0) {
            acc += coeff;
            ++adds;
          }
        }
      }
      const std::uint8_t v = in[y * w + x];
      out[y * w + x] = acc == threshold ? static_cast<std::uint8_t>(1 - v) : v;
    }
  }
  return adds;
}

inline SpikeTensor max_pool2_binary(const SpikeTensor& x) {
  const Shape& s = x.shape();
  if (s.h < 2 || s.w < 2) fail(ErrorKind::Shape, "2x2 downsample needs at least a 2x2 map");
  SpikeTensor out(Shape{s.t, s.c, s.h / 2, s.w / 2});
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = x.plane(t, c);
      auto dst = out.plane(t, c);
      const std::size_t ow = s.w / 2;
      for (std::size_t y = 0; y < s.h / 2; ++y) {
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const std::size_t i = 2 * y * s.w + 2 * xx;
          dst[y * ow + xx] = src[i] | src[i + 1] | src[i + s.w] | src[i + s.w + 1];
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Single pass with one kernel on a (1,1,h,w) plane: a pixel whose 3x3
/// correlation equals 4 is inverted, every other pixel is kept.
inline SpikeTensor denoise_pass(const SpikeTensor& plane, DenoiseKernel kernel,
                                std::uint64_t* adds = nullptr) {
  const Shape& s = plane.shape();
  if (s.t != 1 || s.c != 1) fail(ErrorKind::Shape, "denoise_pass expects a single plane");
  validate_binary(plane.data());
  SpikeTensor out(s);
  const std::uint64_t n = detail::denoise_plane(plane.data(), out.data(), s.h, s.w,
                                                kernel_matrix(kernel), 4);
  if (adds) *adds += n;
  return out;
}

/// K1 -> K2 -> K3 on every (t, c) plane independently, then the optional 2x2 max-pool.
inline SpikeTensor spike_denoise(const SpikeTensor& x, const DenoiseConfig& cfg,
                                 DenoiseCost* cost = nullptr) {
  cfg.validate();
  validate_binary(x.data());
  const Shape& s = x.shape();
  SpikeTensor out(s);
  std::vector<std::uint8_t> a(s.plane());
  std::vector<std::uint8_t> b(s.plane());
  for (std::size_t t = 0; t < s.t; ++t) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = x.plane(t, c);
      std::copy(src.begin(), src.end(), a.begin());
      for (std::size_t p = 0; p < kDenoiseOrder.size(); ++p) {
        const std::uint64_t n = detail::denoise_plane(a, b, s.h, s.w,
                                                      kernel_matrix(kDenoiseOrder[p]),
                                                      cfg.flip_threshold);
        if (cost) cost->pass_adds[p] += n;
        a.swap(b);
      }
      auto dst = out.plane(t, c);
      std::copy(a.begin(), a.end(), dst.begin());
    }
  }
  if (cfg.downsample == DenoiseDownsample::MaxPool2) return detail::max_pool2_binary(out);
  return out;
}

}  // namespace spikedet

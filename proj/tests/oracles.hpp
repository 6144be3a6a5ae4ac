#pragma once

// Reference implementations written directly from the operation definitions,
// sharing no code with the library. Slow on purpose.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Plane = std::vector<int>;  // h * w, row-major

// Salt-and-pepper filter: for each of the three fixed kernels in turn, a pixel
// flips when the 3x3 correlation over the zero-padded previous plane is 4.
inline Plane denoise(const Plane& in, int h, int w) {
  static const int kernels[3][3][3] = {
      {{0, 1, 0}, {1, -1, 1}, {0, 1, 0}},
      {{1, 0, 1}, {0, -1, 0}, {1, 0, 1}},
      {{-1, -1, -1}, {-1, 4, -1}, {-1, -1, -1}},
  };
  Plane cur = in;
  for (const auto& k : kernels) {
    Plane next(cur.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int sum = 0;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            const int yy = y + i - 1;
            const int xx = x + j - 1;
            const int v = (yy >= 0 && yy < h && xx >= 0 && xx < w) ? cur[yy * w + xx] : 0;
            sum += k[i][j] * v;
          }
        }
        const int old = cur[y * w + x];
        next[y * w + x] = sum == 4 ? 1 - old : old;
      }
    }
    cur = next;
  }
  return cur;
}

inline Plane maxpool2(const Plane& in, int h, int w) {
  Plane out((h / 2) * (w / 2));
  for (int y = 0; y < h / 2; ++y)
    for (int x = 0; x < w / 2; ++x)
      out[y * (w / 2) + x] = std::max(std::max(in[2 * y * w + 2 * x], in[2 * y * w + 2 * x + 1]),
                                      std::max(in[(2 * y + 1) * w + 2 * x], in[(2 * y + 1) * w + 2 * x + 1]));
  return out;
}

// Cross-correlation of one (c, h, w) volume in long double. Weights are
// (o, c, ky, kx); output (o, ho, wo).
inline std::vector<long double> conv(const std::vector<double>& x, int c, int h, int w,
                                     const std::vector<double>& weight, const std::vector<double>& bias,
                                     int out, int k, int stride, int pad, int* ho_out = nullptr,
                                     int* wo_out = nullptr) {
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  if (ho_out) *ho_out = ho;
  if (wo_out) *wo_out = wo;
  std::vector<long double> y(static_cast<std::size_t>(out * ho * wo));
  for (int o = 0; o < out; ++o) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        long double acc = bias[o];
        for (int ci = 0; ci < c; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride + ky - pad;
              const int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += static_cast<long double>(weight[((o * c + ci) * k + ky) * k + kx]) * x[(ci * h + iy) * w + ix];
            }
          }
        }
        y[(o * ho + oy) * wo + ox] = acc;
      }
    }
  }
  return y;
}

// Integrate-and-fire over a (T, n) input: hard reset, spike iff v >= v_th.
inline std::vector<int> integrate_fire(const std::vector<double>& input, int steps, double v_th = 1.0,
                                       double v_rst = 0.0) {
  const int n = static_cast<int>(input.size()) / steps;
  std::vector<double> v(n, v_rst);
  std::vector<int> s(input.size());
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < n; ++i) {
      v[i] += input[t * n + i];
      const bool fire = v[i] >= v_th;
      s[t * n + i] = fire;
      if (fire) v[i] = v_rst;
    }
  }
  return s;
}

// Number of entries of an accumulation a spike conv performs: one bias add per
// output, plus one per (active input, in-bounds tap, output channel).
inline std::uint64_t spike_conv_adds(const std::vector<int>& spikes, int c, int h, int w, int out, int k,
                                     int stride, int pad) {
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  std::uint64_t adds = static_cast<std::uint64_t>(out * ho * wo);
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox)
      for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int iy = oy * stride + ky - pad;
            const int ix = ox * stride + kx - pad;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            if (spikes[(ci * h + iy) * w + ix]) adds += static_cast<std::uint64_t>(out);
          }
  return adds;
}

inline std::vector<int> random_bits(std::mt19937_64& rng, std::size_t n, double p = 0.5) {
  std::bernoulli_distribution d(p);
  std::vector<int> v(n);
  for (int& b : v) b = d(rng);
  return v;
}

inline std::vector<double> random_reals(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace oracle

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace support {

/// Kind of the spikedet::Error thrown by `f`; Internal if nothing was thrown.
inline spikedet::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const spikedet::Error& e) {
    return e.kind();
  }
  return spikedet::ErrorKind::Internal;
}

inline spikedet::SpikeTensor random_spikes(std::mt19937_64& rng, const spikedet::Shape& s, double p = 0.4) {
  std::bernoulli_distribution d(p);
  std::vector<std::uint8_t> v(s.numel());
  for (auto& b : v) b = d(rng);
  return spikedet::SpikeTensor(s, std::move(v));
}

inline spikedet::FloatTensor random_floats(std::mt19937_64& rng, const spikedet::Shape& s, float lo, float hi) {
  std::uniform_real_distribution<float> d(lo, hi);
  spikedet::FloatTensor x(s);
  for (float& v : x.data()) v = d(rng);
  return x;
}

}  // namespace support

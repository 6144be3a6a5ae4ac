#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spikedet/denoiser.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

enum class ConvInput { Float, Spike };

/// One convolution as executed: geometry plus what the event-driven kernel did.
struct ConvRecord {
  std::string name;
  ConvInput input = ConvInput::Spike;
  std::size_t c_in = 0, c_out = 0, k_h = 0, k_w = 0, h_out = 0, w_out = 0;
  std::size_t t_steps = 0;
  std::uint64_t input_neurons = 0;         // per step
  std::vector<std::uint64_t> input_spikes;  // per step (spike input only)
  std::vector<std::uint64_t> accumulations;  // per step, literal count (spike input only)
  std::size_t params = 0;
};

/// Spikes emitted by one IF population, per step.
struct FireRecord {
  std::string name;
  std::uint64_t neurons = 0;  // per step
  std::vector<std::uint64_t> spikes;

  double rate() const {
    std::uint64_t total = 0;
    for (auto s : spikes) total += s;
    const double denom = static_cast<double>(neurons) * static_cast<double>(spikes.size());
    return denom > 0 ? static_cast<double>(total) / denom : 0.0;
  }
};

struct DenoiseRecord {
  std::string name;
  DenoiseCost cost;
};

/// Float additions into the infinite-threshold readout membranes.
struct AccumulateRecord {
  std::string name;
  std::uint64_t adds = 0;
};

struct Trace {
  std::vector<ConvRecord> convs;
  std::vector<FireRecord> fires;
  std::vector<DenoiseRecord> denoise;
  std::vector<AccumulateRecord> accumulates;
};

/// Called with every named spike or float edge a forward pass produces,
/// including the ones internal to composite blocks. Exactly one pointer is set.
using EdgeObserver =
    std::function<void(const std::string& name, const SpikeTensor* spikes, const FloatTensor* values)>;

}  // namespace spikedet

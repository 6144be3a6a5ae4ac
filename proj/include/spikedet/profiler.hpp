#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikedet/error.hpp"
#include "spikedet/network.hpp"
#include "spikedet/tensor.hpp"
#include "spikedet/trace.hpp"

namespace spikedet {

/// Picojoule prices of one MAC and one accumulate; a FLOP is half a MAC.
struct EnergyModel {
  double e_mac_pj = 4.6;
  double e_add_pj = 0.9;
  double mac_per_flop = 0.5;
};

/// Geometry of one convolution for cost accounting.
struct LayerShape {
  std::size_t c_in = 1, c_out = 1, k_h = 1, k_w = 1, h_out = 1, w_out = 1;
  std::size_t t_steps = 1;

  void validate() const {
    if (c_in == 0 || c_out == 0 || k_h == 0 || k_w == 0 || h_out == 0 || w_out == 0 || t_steps == 0) {
      fail(ErrorKind::Config, "layer extents must be positive");
    }
  }
};

/// Multiply-accumulates of a float-input conv: c_in * k_h * k_w * c_out * h_out * w_out.
inline std::uint64_t flops(const LayerShape& s) {
  s.validate();
  return static_cast<std::uint64_t>(s.c_in) * s.k_h * s.k_w * s.c_out * s.h_out * s.w_out;
}

/// Synaptic operations of a spike-input conv given the input firing rate at
/// each step: sum_t (f_t * c_in * k_h * k_w + 1) * c_out * h_out * w_out.
inline double sops(const LayerShape& s, std::span<const double> rates) {
  s.validate();
  if (rates.size() != s.t_steps) {
    fail(ErrorKind::Config, "expected " + std::to_string(s.t_steps) + " firing rates, got " +
                                std::to_string(rates.size()));
  }
  const double fan = static_cast<double>(s.c_in * s.k_h * s.k_w);
  const double outs = static_cast<double>(s.c_out * s.h_out * s.w_out);
  double total = 0.0;
  for (double f : rates) {
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::Validation, "firing rate outside [0, 1]");
    total += (f * fan + 1.0) * outs;
  }
  return total;
}

__extension__ using uint128 = unsigned __int128;

/// The same sum with f_t = spikes_t / neurons kept as an exact fraction.
struct ExactCount {
  uint128 numerator = 0;
  std::uint64_t denominator = 1;

  bool is_integer() const { return numerator % denominator == 0; }
  uint128 value() const { return numerator / denominator; }
};

inline ExactCount sops_exact(const LayerShape& s, std::span<const std::uint64_t> spikes, std::uint64_t neurons) {
  s.validate();
  if (spikes.size() != s.t_steps) fail(ErrorKind::Config, "spike counts do not cover every step");
  if (neurons == 0) fail(ErrorKind::Config, "input population is empty");
  using u128 = uint128;
  const u128 fan = static_cast<u128>(s.c_in) * s.k_h * s.k_w;
  const u128 outs = static_cast<u128>(s.c_out) * s.h_out * s.w_out;
  ExactCount c;
  c.denominator = neurons;
  for (std::uint64_t m : spikes) {
    if (m > neurons) fail(ErrorKind::Validation, "more spikes than neurons");
    c.numerator += (static_cast<u128>(m) * fan + neurons) * outs;
  }
  return c;
}

/// (flops * mac_per_flop * e_mac + sops * e_add) in millijoules.
inline double energy_mj(double total_flops, double total_sops, const EnergyModel& m = {}) {
  if (total_flops < 0 || total_sops < 0) fail(ErrorKind::Validation, "operation counts must be nonnegative");
  const double pj = total_flops * m.mac_per_flop * m.e_mac_pj + total_sops * m.e_add_pj;
  return pj * 1e-9;
}

/// Fraction of ones in a spike tensor.
inline double firing_rate(const SpikeTensor& x) {
  std::uint64_t ones = 0;
  for (std::uint8_t v : x.data()) ones += v;
  return static_cast<double>(ones) / static_cast<double>(x.size());
}

enum class CostKind { Flops, Sops, Denoise, Accumulate };

inline std::string to_string(CostKind k) {
  switch (k) {
    case CostKind::Flops: return "flops";
    case CostKind::Sops: return "sops";
    case CostKind::Denoise: return "denoise";
    case CostKind::Accumulate: return "accumulate";
  }
  return "?";
}

struct LayerCost {
  std::string name;
  CostKind kind = CostKind::Sops;
  double flops = 0.0;
  double sops = 0.0;         // includes denoiser integer adds
  double accumulate = 0.0;   // readout membrane adds
  double instrumented = 0.0; // accumulations counted during the forward pass
  std::size_t params = 0;
  std::vector<double> input_rates;  // per step, spike convs only
};

struct RateEntry {
  std::string name;
  double rate = 0.0;
};

struct ProfileReport {
  std::size_t inputs = 1;
  std::size_t t_steps = 1;
  EnergyModel model;
  std::vector<LayerCost> layers;
  std::vector<RateEntry> firing_rates;
  std::size_t params = 0;
  double total_flops = 0.0;
  double total_sops = 0.0;
  double denoise_adds = 0.0;
  double accumulate_adds = 0.0;
  double energy_mj = 0.0;             // FLOPs + SOPs, the comparison figure
  double accumulate_energy_mj = 0.0;  // readout adds at e_add
  double energy_total_mj = 0.0;

  /// Recomputes every total from the per-layer entries.
  void finalize() {
    total_flops = total_sops = denoise_adds = accumulate_adds = 0.0;
    for (const auto& l : layers) {
      total_flops += l.flops;
      total_sops += l.sops;
      accumulate_adds += l.accumulate;
      if (l.kind == CostKind::Denoise) denoise_adds += l.sops;
    }
    energy_mj = spikedet::energy_mj(total_flops, total_sops, model);
    accumulate_energy_mj = spikedet::energy_mj(0.0, accumulate_adds, model);
    energy_total_mj = energy_mj + accumulate_energy_mj;
  }
};

/// Cost report from the trace of one forward pass.
inline ProfileReport build_report(const Trace& trace, std::size_t params, std::size_t t_steps,
                                  const EnergyModel& model = {}) {
  ProfileReport r;
  r.model = model;
  r.params = params;
  r.t_steps = t_steps;
  for (const DenoiseRecord& d : trace.denoise) {
    LayerCost c;
    c.name = d.name;
    c.kind = CostKind::Denoise;
    c.sops = static_cast<double>(d.cost.total());
    c.instrumented = c.sops;
    r.layers.push_back(std::move(c));
  }
  for (const ConvRecord& cr : trace.convs) {
    const LayerShape s{cr.c_in, cr.c_out, cr.k_h, cr.k_w, cr.h_out, cr.w_out, cr.t_steps};
    LayerCost c;
    c.name = cr.name;
    c.kind = cr.input == ConvInput::Float ? CostKind::Flops : CostKind::Sops;
    c.params = cr.params;
    if (cr.input == ConvInput::Float) {
      c.flops = static_cast<double>(flops(s)) * static_cast<double>(cr.t_steps);
    } else {
      for (std::uint64_t m : cr.input_spikes) {
        c.input_rates.push_back(static_cast<double>(m) / static_cast<double>(cr.input_neurons));
      }
      c.sops = sops(s, c.input_rates);
      for (std::uint64_t a : cr.accumulations) c.instrumented += static_cast<double>(a);
    }
    r.layers.push_back(std::move(c));
  }
  for (const AccumulateRecord& a : trace.accumulates) {
    LayerCost c;
    c.name = a.name;
    c.kind = CostKind::Accumulate;
    c.accumulate = static_cast<double>(a.adds);
    r.layers.push_back(std::move(c));
  }
  for (const FireRecord& f : trace.fires) r.firing_rates.push_back({f.name, f.rate()});
  r.finalize();
  return r;
}

/// Runs `net` on `image` with tracing and prices the result.
inline ProfileReport profile(const Network& net, const FloatTensor& image, const EnergyModel& model = {},
                             const ForwardOptions& base = {}) {
  Trace trace;
  ForwardOptions opt = base;
  opt.trace = &trace;
  net.forward(image, opt);
  return build_report(trace, net.parameter_count(), net.t_steps(), model);
}

/// Element-wise mean of reports from the same network over several inputs.
inline ProfileReport average(std::span<const ProfileReport> reports) {
  if (reports.empty()) fail(ErrorKind::Config, "nothing to average");
  ProfileReport out = reports.front();
  const double n = static_cast<double>(reports.size());
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const ProfileReport& r = reports[k];
    if (r.layers.size() != out.layers.size() || r.firing_rates.size() != out.firing_rates.size()) {
      fail(ErrorKind::Shape, "reports come from different networks");
    }
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
      LayerCost& l = out.layers[i];
      const LayerCost& o = r.layers[i];
      l.flops += o.flops;
      l.sops += o.sops;
      l.accumulate += o.accumulate;
      l.instrumented += o.instrumented;
      for (std::size_t t = 0; t < l.input_rates.size(); ++t) l.input_rates[t] += o.input_rates[t];
    }
    for (std::size_t i = 0; i < out.firing_rates.size(); ++i) out.firing_rates[i].rate += r.firing_rates[i].rate;
  }
  for (LayerCost& l : out.layers) {
    l.flops /= n;
    l.sops /= n;
    l.accumulate /= n;
    l.instrumented /= n;
    for (double& f : l.input_rates) f /= n;
  }
  for (RateEntry& e : out.firing_rates) e.rate /= n;
  out.inputs = reports.size();
  out.finalize();
  return out;
}

inline nlohmann::json to_json(const ProfileReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerCost& l : r.layers) {
    layers.push_back({{"name", l.name},
                      {"kind", to_string(l.kind)},
                      {"flops", l.flops},
                      {"sops", l.sops},
                      {"accumulate", l.accumulate},
                      {"instrumented", l.instrumented},
                      {"params", l.params},
                      {"input_rates", l.input_rates}});
  }
  nlohmann::json rates = nlohmann::json::array();
  for (const RateEntry& e : r.firing_rates) rates.push_back({{"name", e.name}, {"rate", e.rate}});
  return {{"inputs", r.inputs},
          {"t_steps", r.t_steps},
          {"energy_model", {{"e_mac_pj", r.model.e_mac_pj}, {"e_add_pj", r.model.e_add_pj},
                            {"mac_per_flop", r.model.mac_per_flop}}},
          {"layers", layers},
          {"firing_rates", rates},
          {"totals",
           {{"params", r.params},
            {"flops", r.total_flops},
            {"sops", r.total_sops},
            {"denoise_adds", r.denoise_adds},
            {"accumulate_adds", r.accumulate_adds},
            {"energy_mj", r.energy_mj},
            {"accumulate_energy_mj", r.accumulate_energy_mj},
            {"energy_total_mj", r.energy_total_mj}}}};
}

inline std::string to_text(const ProfileReport& r) {
  std::ostringstream os;
  os << std::fixed;
  os << "inputs " << r.inputs << ", T = " << r.t_steps << "\n\n";
  os << std::left << std::setw(28) << "layer" << std::setw(11) << "kind" << std::right << std::setw(10)
     << "params" << std::setw(12) << "MFLOPs" << std::setw(12) << "MSOPs" << std::setw(10) << "rate" << '\n';
  for (const LayerCost& l : r.layers) {
    double rate = 0.0;
    for (double f : l.input_rates) rate += f;
    if (!l.input_rates.empty()) rate /= static_cast<double>(l.input_rates.size());
    os << std::left << std::setw(28) << l.name << std::setw(11) << to_string(l.kind) << std::right
       << std::setw(10) << l.params << std::setprecision(3) << std::setw(12) << l.flops * 1e-6
       << std::setw(12) << (l.sops + l.accumulate) * 1e-6;
    if (l.kind == CostKind::Sops) {
      os << std::setprecision(4) << std::setw(10) << rate;
    }
    os << '\n';
  }
  os << "\nfiring rates\n";
  for (const RateEntry& e : r.firing_rates) {
    os << "  " << std::left << std::setw(28) << e.name << std::right << std::setprecision(4) << e.rate << '\n';
  }
  os << std::setprecision(4);
  os << "\nparams            " << r.params << '\n';
  os << "GFLOPs            " << r.total_flops * 1e-9 << '\n';
  os << "GSOPs             " << r.total_sops * 1e-9 << "  (denoiser " << r.denoise_adds * 1e-9 << ")\n";
  os << "energy            " << r.energy_mj << " mJ\n";
  os << "readout adds      " << r.accumulate_adds * 1e-9 << " G, " << r.accumulate_energy_mj << " mJ\n";
  os << "energy incl. head " << r.energy_total_mj << " mJ\n";
  return os.str();
}

}  // namespace spikedet

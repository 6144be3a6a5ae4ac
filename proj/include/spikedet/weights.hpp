#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "spikedet/error.hpp"
#include "spikedet/graph.hpp"
#include "spikedet/tensor.hpp"
#include "spikedet/tensor_io.hpp"

namespace spikedet {

// WeightsFile layout, little-endian:
//   "SUW1", u32 record count, then per record:
//   u32 name length, name bytes, u8 flags (bit 0 = fused),
//   u32 extents t, c, h, w, f32 payload of t*c*h*w values.
//
// Conv weights use extents (out, in, k_h, k_w), biases (1, 1, 1, out), SeBN
// arrays (1, 1, T, C) and BN arrays (1, 1, 1, C). Folded per-step convs are
// stored as <unit>.weight.t<k> / <unit>.bias.t<k>.

struct WeightRecord {
  Shape dims;
  std::vector<float> data;
  bool fused = false;
};

class WeightStore {
 public:
  void put(const std::string& name, WeightRecord rec) {
    if (rec.data.size() != rec.dims.checked_numel()) {
      fail(ErrorKind::Weights, "record '" + name + "' payload does not match its extents");
    }
    records_[name] = std::move(rec);
  }

  void add(const std::string& name, WeightRecord rec) {
    if (records_.count(name)) fail(ErrorKind::Weights, "duplicate weight record '" + name + "'");
    put(name, std::move(rec));
  }

  bool contains(const std::string& name) const { return records_.count(name) != 0; }

  const WeightRecord& require(const std::string& name) const {
    auto it = records_.find(name);
    if (it == records_.end()) fail(ErrorKind::Weights, "missing weight record '" + name + "'");
    return it->second;
  }

  /// Record payload checked against the expected extents.
  const std::vector<float>& require(const std::string& name, const Shape& dims) const {
    const WeightRecord& rec = require(name);
    if (rec.dims != dims) {
      fail(ErrorKind::Weights, "record '" + name + "' has extents " + rec.dims.str() + ", expected " +
                                   dims.str());
    }
    return rec.data;
  }

  bool any_fused() const {
    for (const auto& [name, rec] : records_)
      if (rec.fused) return true;
    return false;
  }

  const std::map<std::string, WeightRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::map<std::string, WeightRecord> records_;
};

inline std::string encode_weights(const WeightStore& store) {
  std::string out = "SUW1";
  detail::put_u32(out, detail::narrow_extent(store.size()));
  for (const auto& [name, rec] : store.records()) {
    detail::put_u32(out, detail::narrow_extent(name.size()));
    out += name;
    out.push_back(rec.fused ? '\x01' : '\x00');
    detail::encode_shape(out, rec.dims);
    for (float v : rec.data) detail::put_f32(out, v);
  }
  return out;
}

inline WeightStore decode_weights(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "SUW1") != 0) fail(ErrorKind::Format, "bad weights magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = 4;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) fail(ErrorKind::Format, "truncated weights file");
  };
  const std::uint32_t count = detail::get_u32(p + pos);
  pos += 4;
  WeightStore store;
  for (std::uint32_t r = 0; r < count; ++r) {
    need(4);
    const std::uint32_t len = detail::get_u32(p + pos);
    pos += 4;
    need(len);
    std::string name(bytes.data() + pos, len);
    pos += len;
    need(1 + 16);
    const std::uint8_t flags = p[pos++];
    if (flags > 1) fail(ErrorKind::Format, "record '" + name + "' has unknown flags");
    WeightRecord rec;
    rec.fused = flags & 1u;
    rec.dims = {detail::get_u32(p + pos), detail::get_u32(p + pos + 4), detail::get_u32(p + pos + 8),
                detail::get_u32(p + pos + 12)};
    pos += 16;
    std::size_t n = 0;
    try {
      n = rec.dims.checked_numel();
    } catch (const Error& e) {
      fail(ErrorKind::Format, "record '" + name + "': " + e.what());
    }
    if (n > (bytes.size() - pos) / 4) fail(ErrorKind::Format, "truncated payload for '" + name + "'");
    rec.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) rec.data[i] = detail::get_f32(p + pos + 4 * i);
    pos += 4 * n;
    if (store.contains(name)) fail(ErrorKind::Format, "duplicate record name '" + name + "'");
    store.put(name, std::move(rec));
  }
  if (pos != bytes.size()) fail(ErrorKind::Format, "trailing bytes after the last weight record");
  return store;
}

inline void write_weights(const WeightStore& store, const std::filesystem::path& path) {
  detail::write_file(path, encode_weights(store));
}

inline WeightStore read_weights(const std::filesystem::path& path) {
  return decode_weights(detail::read_file(path));
}

inline Shape conv_weight_dims(const UnitSpec& u) { return {u.out, u.in, u.k, u.k}; }
inline Shape bias_dims(std::size_t out) { return {1, 1, 1, out}; }
inline Shape norm_dims(std::size_t t_steps, std::size_t channels) { return {1, 1, t_steps, channels}; }

/// Deterministic random parameters for every unit in the graph: fan-in scaled
/// uniform conv weights and randomized, already-populated normalization stats.
inline WeightStore random_weights(const NetGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return static_cast<float>(std::uniform_real_distribution<double>(lo, hi)(rng));
  };
  auto fill = [&](std::size_t n, double lo, double hi) {
    std::vector<float> v(n);
    for (float& x : v) x = uniform(lo, hi);
    return v;
  };
  auto norm_records = [&](WeightStore& store, const std::string& name, std::size_t rows, std::size_t ch) {
    const std::size_t m = rows * ch;
    store.add(name + ".gamma", {norm_dims(rows, ch), fill(m, 0.8, 1.2), false});
    store.add(name + ".beta", {norm_dims(rows, ch), fill(m, 0.0, 0.5), false});
    store.add(name + ".mean", {norm_dims(rows, ch), fill(m, -0.1, 0.1), false});
    store.add(name + ".var", {norm_dims(rows, ch), fill(m, 0.5, 1.5), false});
  };

  const ParamLayout layout = param_layout(g);
  WeightStore store;
  for (const UnitSpec& u : layout.units) {
    const double fan_in = static_cast<double>(u.in * u.k * u.k);
    const double bound = std::sqrt(6.0 / fan_in);
    store.add(u.name + ".weight", {conv_weight_dims(u), fill(u.out * u.in * u.k * u.k, -bound, bound), false});
    store.add(u.name + ".bias", {bias_dims(u.out), fill(u.out, -0.1, 0.1), false});
    if (u.norm == NormKind::SeBN) norm_records(store, u.norm_name, u.t_steps, u.out);
    if (u.norm == NormKind::BatchNorm) norm_records(store, u.norm_name, 1, u.out);
  }
  for (const LooseNormSpec& n : layout.loose_norms) norm_records(store, n.name, n.t_steps, n.channels);
  return store;
}

}  // namespace spikedet

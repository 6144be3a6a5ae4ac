#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spikedet/blocks.hpp"
#include "spikedet/conv.hpp"
#include "spikedet/denoiser.hpp"
#include "spikedet/error.hpp"
#include "spikedet/graph.hpp"
#include "spikedet/normalization.hpp"
#include "spikedet/tensor.hpp"
#include "spikedet/trace.hpp"
#include "spikedet/weights.hpp"

namespace spikedet {

struct ForwardOptions {
  Trace* trace = nullptr;
  const EdgeObserver* observer = nullptr;
#ifdef NDEBUG
  bool check_spikes = false;
#else
  bool check_spikes = true;
#endif
  std::function<void(const std::string&)> warn;  // defaults to std::clog when empty
};

struct NamedOutput {
  std::string name;
  FloatTensor value;
};

namespace detail {

class RecordReader {
 public:
  explicit RecordReader(const WeightStore& store) : store_(store) {}

  const std::vector<float>& take(const std::string& name, const Shape& dims, bool fused) {
    const WeightRecord& rec = store_.require(name);
    if (rec.fused != fused) {
      fail(ErrorKind::Weights, "record '" + name + "' is " + (rec.fused ? "" : "not ") +
                                   "marked fused, which does not fit its unit");
    }
    used_.insert(name);
    return store_.require(name, dims);
  }

  bool has(const std::string& name) const { return store_.contains(name); }
  bool is_fused(const std::string& name) const { return has(name) && store_.require(name).fused; }

  void check_all_used() const {
    for (const auto& [name, rec] : store_.records()) {
      if (!used_.count(name)) fail(ErrorKind::Weights, "record '" + name + "' matches no graph parameter");
    }
  }

 private:
  const WeightStore& store_;
  std::set<std::string> used_;
};

inline ConvLayer read_conv(RecordReader& r, const UnitSpec& u, const std::string& weight,
                           const std::string& bias, bool fused) {
  ConvLayer c = ConvLayer::make(u.in, u.out, u.k, u.stride, u.pad);
  c.weight = r.take(weight, conv_weight_dims(u), fused);
  c.bias = r.take(bias, bias_dims(u.out), fused);
  return c;
}

template <class Norm>
void read_norm(RecordReader& r, const std::string& name, Norm& norm, std::size_t rows, std::size_t ch) {
  const Shape dims = norm_dims(rows, ch);
  norm.gamma = r.take(name + ".gamma", dims, false);
  norm.beta = r.take(name + ".beta", dims, false);
  norm.run_mean = r.take(name + ".mean", dims, false);
  norm.run_var = r.take(name + ".var", dims, false);
  norm.stats_ready = true;
  norm.validate();
}

inline ConvUnit bind_unit(RecordReader& r, const UnitSpec& u) {
  ConvUnit unit;
  unit.name = u.name;
  unit.norm = u.norm;
  if (u.norm == NormKind::SeBN && r.is_fused(u.name + ".weight.t0")) {
    for (std::size_t t = 0; t < u.t_steps; ++t) {
      const std::string sfx = ".t" + std::to_string(t);
      unit.fused.push_back(read_conv(r, u, u.name + ".weight" + sfx, u.name + ".bias" + sfx, true));
    }
    unit.conv = unit.fused.front();
    unit.sebn = SeBNLayer::make(u.t_steps, u.out, u.n);
    return unit;
  }
  if (u.norm == NormKind::BatchNorm && r.is_fused(u.name + ".weight")) {
    unit.fused.push_back(read_conv(r, u, u.name + ".weight", u.name + ".bias", true));
    unit.conv = unit.fused.front();
    unit.bn = BatchNormLayer::make(u.out);
    return unit;
  }
  unit.conv = read_conv(r, u, u.name + ".weight", u.name + ".bias", false);
  if (u.norm == NormKind::SeBN) {
    unit.sebn = SeBNLayer::make(u.t_steps, u.out, u.n);
    read_norm(r, u.norm_name, unit.sebn, u.t_steps, u.out);
  } else if (u.norm == NormKind::BatchNorm) {
    unit.bn = BatchNormLayer::make(u.out);
    read_norm(r, u.norm_name, unit.bn, 1, u.out);
  }
  return unit;
}

}  // namespace detail

/// A validated graph with every parameter bound, ready to run.
class Network {
 public:
  using NodeParams = std::variant<std::monostate, ConvUnit, SeBNLayer, SuBlock1, SuBlock2, SpikeSpp, DetectHead>;

  Network(NetGraph graph, const WeightStore& store) : graph_(std::move(graph)) {
    validate_graph(graph_);
    const ParamLayout layout = param_layout(graph_);
    detail::RecordReader reader(store);
    std::map<std::string, ConvUnit> units;
    for (const UnitSpec& u : layout.units) units.emplace(u.name, detail::bind_unit(reader, u));
    std::map<std::string, SeBNLayer> loose;
    for (const LooseNormSpec& n : layout.loose_norms) {
      SeBNLayer layer = SeBNLayer::make(n.t_steps, n.channels, n.n);
      detail::read_norm(reader, n.name, layer, n.t_steps, n.channels);
      loose.emplace(n.name, std::move(layer));
    }
    reader.check_all_used();

    auto unit = [&](const std::string& name) { return std::move(units.at(name)); };
    params_.resize(graph_.nodes.size());
    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) {
      const Node& n = graph_.nodes[i];
      const std::string& id = n.id;
      switch (n.kind) {
        case NodeKind::Encoder:
        case NodeKind::Conv: params_[i] = unit(id); break;
        case NodeKind::SeBN:
          if (loose.count(id)) params_[i] = std::move(loose.at(id));
          break;
        case NodeKind::SuBlock1:
          params_[i] = SuBlock1{unit(id + ".conv_a"), unit(id + ".conv_b"), unit(id + ".shortcut")};
          break;
        case NodeKind::SuBlock2: params_[i] = SuBlock2{unit(id + ".conv_a"), unit(id + ".conv_b")}; break;
        case NodeKind::SpikeSpp: {
          const std::size_t pool = n.get_size("pool", 5);
          params_[i] = SpikeSpp{unit(id + ".conv_in"), unit(id + ".conv_out"), pool, pool / 2};
          break;
        }
        case NodeKind::DetectHead: {
          DetectHead head;
          for (std::size_t s = 0; s < 2; ++s) {
            const std::string p = id + ".p" + std::to_string(s);
            head.scales.push_back(DetectScale{{unit(p + ".box.hidden"), unit(p + ".box.out")},
                                              {unit(p + ".cls.hidden"), unit(p + ".cls.out")}});
          }
          params_[i] = std::move(head);
          break;
        }
        default: break;
      }
    }
  }

  const NetGraph& graph() const { return graph_; }
  std::size_t t_steps() const { return graph_.t_steps; }

  /// Every conv unit in node order.
  std::vector<const ConvUnit*> units() const {
    std::vector<const ConvUnit*> out;
    const_cast<Network*>(this)->for_each_unit([&](ConvUnit& u) { out.push_back(&u); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const ConvUnit* u : units()) n += u->parameter_count();
    for (const auto& p : params_)
      if (const auto* layer = std::get_if<SeBNLayer>(&p)) n += layer->parameter_count();
    return n;
  }

  bool is_fused() const {
    for (const ConvUnit* u : units())
      if (u->is_fused()) return true;
    return false;
  }

  /// Folds every normalization into its convolution.
  void fold() {
    if (is_fused()) fail(ErrorKind::Config, "weights are already fused");
    for_each_unit([](ConvUnit& u) {
      if (u.norm != NormKind::None) u.fold();
    });
  }

  /// Parameters in WeightsFile naming, fused or not as currently bound.
  WeightStore export_weights() const {
    WeightStore store;
    auto put = [&](const std::string& name, Shape dims, const std::vector<float>& v, bool fused) {
      store.add(name, WeightRecord{dims, v, fused});
    };
    auto put_norm = [&](const std::string& name, std::size_t rows, std::size_t ch, const auto& norm) {
      const Shape dims = norm_dims(rows, ch);
      put(name + ".gamma", dims, norm.gamma, false);
      put(name + ".beta", dims, norm.beta, false);
      put(name + ".mean", dims, norm.run_mean, false);
      put(name + ".var", dims, norm.run_var, false);
    };
    const ParamLayout layout = param_layout(graph_);
    std::map<std::string, const UnitSpec*> specs;
    for (const UnitSpec& u : layout.units) specs[u.name] = &u;
    for (const ConvUnit* u : units()) {
      const UnitSpec& spec = *specs.at(u->name);
      const Shape wd = conv_weight_dims(spec);
      const Shape bd = bias_dims(spec.out);
      if (u->is_fused() && u->norm == NormKind::SeBN) {
        for (std::size_t t = 0; t < u->fused.size(); ++t) {
          const std::string sfx = ".t" + std::to_string(t);
          put(u->name + ".weight" + sfx, wd, u->fused[t].weight, true);
          put(u->name + ".bias" + sfx, bd, u->fused[t].bias, true);
        }
      } else if (u->is_fused()) {
        put(u->name + ".weight", wd, u->fused.front().weight, true);
        put(u->name + ".bias", bd, u->fused.front().bias, true);
      } else {
        put(u->name + ".weight", wd, u->conv.weight, false);
        put(u->name + ".bias", bd, u->conv.bias, false);
        if (u->norm == NormKind::SeBN) put_norm(spec.norm_name, spec.t_steps, spec.out, u->sebn);
        if (u->norm == NormKind::BatchNorm) put_norm(spec.norm_name, 1, spec.out, u->bn);
      }
    }
    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) {
      if (const auto* layer = std::get_if<SeBNLayer>(&params_[i])) {
        put_norm(graph_.nodes[i].id, layer->t_steps, layer->channels, *layer);
      }
    }
    return store;
  }

  /// Runs the graph on a (1, C, H, W) image with values in [0, 1]. Returns the
  /// detect-head readouts as <id>.p0 / <id>.p1, or the last node's output when
  /// the graph has no head.
  std::vector<NamedOutput> forward(const FloatTensor& image, const ForwardOptions& opt = {}) const {
    const Shape& is = image.shape();
    if (is.t != 1) fail(ErrorKind::Shape, "input image must have t = 1, got " + is.str());
    infer_shapes(graph_, is.h, is.w);  // spatial algebra before any work

    ForwardContext ctx;
    ctx.trace = opt.trace;
    ctx.observer = opt.observer;
    ctx.check_spikes = opt.check_spikes;
    if (opt.warn) ctx.warn = opt.warn;

    using Value = std::variant<std::monostate, SpikeTensor, FloatTensor>;
    const auto users = consumers(graph_);
    std::vector<std::size_t> pending(graph_.nodes.size());
    for (std::size_t i = 0; i < users.size(); ++i) pending[i] = users[i].size();
    std::vector<Value> values(graph_.nodes.size());
    std::vector<NamedOutput> outputs;

    auto spike_in = [&](const Node& n, std::size_t j) -> const SpikeTensor& {
      const Value& v = values[*graph_.find(n.inputs[j])];
      if (const auto* s = std::get_if<SpikeTensor>(&v)) return *s;
      fail(ErrorKind::Shape, n.where() + "expected a spike input from '" + n.inputs[j] + "'");
    };
    auto float_in = [&](const Node& n, std::size_t j) -> const FloatTensor& {
      const Value& v = values[*graph_.find(n.inputs[j])];
      if (const auto* f = std::get_if<FloatTensor>(&v)) return *f;
      fail(ErrorKind::Shape, n.where() + "expected a float input from '" + n.inputs[j] + "'");
    };
    auto is_spike = [&](const Node& n, std::size_t j) {
      return std::holds_alternative<SpikeTensor>(values[*graph_.find(n.inputs[j])]);
    };

    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) {
      const Node& n = graph_.nodes[i];
      const NodeParams& p = params_[i];
      Value out;
      switch (n.kind) {
        case NodeKind::Encoder: {
          const ConvUnit& u = std::get<ConvUnit>(p);
          if (is.c != u.geometry().in_ch) {
            fail(ErrorKind::Shape, "encoder expects " + std::to_string(u.geometry().in_ch) +
                                       " image channels, got " + std::to_string(is.c));
          }
          out = encoder(image, Encoder{u}, graph_.t_steps, ctx, n.id);
          break;
        }
        case NodeKind::Denoise: {
          const SpikeTensor& x = spike_in(n, 0);
          if (n.get_string("enable", "1") == "0") {
            out = n.get_string("downsample", "none") == "maxpool2" ? detail::max_pool2_binary(x) : x;
            break;
          }
          DenoiseConfig cfg;
          cfg.downsample = n.get_string("downsample", "none") == "maxpool2" ? DenoiseDownsample::MaxPool2
                                                                            : DenoiseDownsample::None;
          DenoiseCost cost;
          out = spike_denoise(x, cfg, &cost);
          if (ctx.trace) ctx.trace->denoise.push_back({n.id, cost});
          break;
        }
        case NodeKind::Conv: {
          const ConvUnit& u = std::get<ConvUnit>(p);
          out = is_spike(n, 0) ? u.forward(spike_in(n, 0), ctx) : u.forward_dense(float_in(n, 0), ctx);
          break;
        }
        case NodeKind::SeBN: {
          const FloatTensor& x = float_in(n, 0);
          if (const auto* layer = std::get_if<SeBNLayer>(&p)) {
            out = sebn_forward_eval(x, *layer);
          } else {
            out = x;  // already applied by the merged CONV unit
          }
          break;
        }
        case NodeKind::If: {
          ForwardContext local = ctx;
          local.neuron.v_th = static_cast<float>(n.get_real("vth", ctx.neuron.v_th));
          local.neuron.validate();
          out = local.fire(n.id, float_in(n, 0));
          break;
        }
        case NodeKind::SuBlock1: out = sublock1(spike_in(n, 0), std::get<SuBlock1>(p), ctx, n.id); break;
        case NodeKind::SuBlock2: out = sublock2(spike_in(n, 0), std::get<SuBlock2>(p), ctx, n.id); break;
        case NodeKind::SpikeSpp: out = spike_spp(spike_in(n, 0), std::get<SpikeSpp>(p), ctx, n.id); break;
        case NodeKind::MaxPool: {
          const std::size_t k = n.get_size("k", 2);
          const std::size_t s = n.get_size("stride", k);
          const std::size_t pad = n.get_size("pad", 0);
          if (is_spike(n, 0)) {
            out = max_pool(spike_in(n, 0), k, s, pad);
          } else {
            out = max_pool(float_in(n, 0), k, s, pad);
          }
          break;
        }
        case NodeKind::Upsample: {
          const std::size_t f = n.get_size("factor", 2);
          if (is_spike(n, 0)) {
            out = upsample_nearest(spike_in(n, 0), f);
          } else {
            out = upsample_nearest(float_in(n, 0), f);
          }
          break;
        }
        case NodeKind::Concat: {
          if (is_spike(n, 0)) {
            std::vector<const SpikeTensor*> parts;
            for (std::size_t j = 0; j < n.inputs.size(); ++j) parts.push_back(&spike_in(n, j));
            out = concat_channels<std::uint8_t>(parts);
          } else {
            std::vector<const FloatTensor*> parts;
            for (std::size_t j = 0; j < n.inputs.size(); ++j) parts.push_back(&float_in(n, j));
            out = concat_channels<float>(parts);
          }
          break;
        }
        case NodeKind::Add: {
          FloatTensor sum = float_in(n, 0);
          for (std::size_t j = 1; j < n.inputs.size(); ++j) sum = detail::add(sum, float_in(n, j), n.id);
          out = std::move(sum);
          break;
        }
        case NodeKind::DetectHead: {
          const SpikeTensor* feats[] = {&spike_in(n, 0), &spike_in(n, 1)};
          auto preds = detect_head(feats, std::get<DetectHead>(p), ctx, n.id);
          for (std::size_t s = 0; s < preds.size(); ++s) {
            outputs.push_back({n.id + ".p" + std::to_string(s), std::move(preds[s])});
          }
          break;
        }
      }

      if (const auto* s = std::get_if<SpikeTensor>(&out)) {
        if (n.kind != NodeKind::Encoder && n.kind != NodeKind::If) ctx.spike_edge(n.id, *s);
        else if (ctx.check_spikes) validate_binary(s->data());
      } else if (const auto* f = std::get_if<FloatTensor>(&out)) {
        ctx.float_edge(n.id, *f);
      }

      const bool last = i + 1 == graph_.nodes.size();
      if (last && n.kind != NodeKind::DetectHead) {
        if (const auto* s = std::get_if<SpikeTensor>(&out)) outputs.push_back({n.id, cast<float>(*s)});
        if (const auto* f = std::get_if<FloatTensor>(&out)) outputs.push_back({n.id, *f});
      }
      values[i] = std::move(out);
      for (const auto& in : n.inputs) {
        const std::size_t j = *graph_.find(in);
        if (--pending[j] == 0) values[j] = std::monostate{};
      }
    }
    return outputs;
  }

 private:
  template <class F>
  void for_each_unit(F&& f) {
    for (auto& p : params_) {
      if (auto* u = std::get_if<ConvUnit>(&p)) f(*u);
      if (auto* b = std::get_if<SuBlock1>(&p)) {
        f(b->conv_a);
        f(b->conv_b);
        f(b->shortcut);
      }
      if (auto* b = std::get_if<SuBlock2>(&p)) {
        f(b->conv_a);
        f(b->conv_b);
      }
      if (auto* b = std::get_if<SpikeSpp>(&p)) {
        f(b->conv_in);
        f(b->conv_out);
      }
      if (auto* h = std::get_if<DetectHead>(&p)) {
        for (auto& s : h->scales) {
          f(s.box.hidden);
          f(s.box.out);
          f(s.cls.hidden);
          f(s.cls.out);
        }
      }
    }
  }

  NetGraph graph_;
  std::vector<NodeParams> params_;
};

/// Folds every SeBN/BN into per-step convolution records.
inline WeightStore fuse_weights(const NetGraph& graph, const WeightStore& store) {
  if (store.any_fused()) fail(ErrorKind::Config, "weights are already fused");
  Network net(graph, store);
  net.fold();
  return net.export_weights();
}

}  // namespace spikedet

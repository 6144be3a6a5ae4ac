#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spikedet/blocks.hpp"
#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

// Network config, one directive per line, '#' starts a comment:
//
//   tsteps=4
//   node <id> <KIND> key=value ... inputs=<id>,<id>
//
// Nodes must be listed after all of their inputs, which makes the graph
// acyclic by construction. See configs/reference.net for a full example.

enum class NodeKind {
  Encoder,
  Denoise,
  Conv,
  SeBN,
  If,
  SuBlock1,
  SuBlock2,
  SpikeSpp,
  MaxPool,
  Upsample,
  Concat,
  Add,
  DetectHead,
};

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Encoder: return "ENCODER";
    case NodeKind::Denoise: return "DENOISE";
    case NodeKind::Conv: return "CONV";
    case NodeKind::SeBN: return "SEBN";
    case NodeKind::If: return "IF";
    case NodeKind::SuBlock1: return "SUBLOCK1";
    case NodeKind::SuBlock2: return "SUBLOCK2";
    case NodeKind::SpikeSpp: return "SPIKESPP";
    case NodeKind::MaxPool: return "MAXPOOL";
    case NodeKind::Upsample: return "UPSAMPLE";
    case NodeKind::Concat: return "CONCAT";
    case NodeKind::Add: return "ADD";
    case NodeKind::DetectHead: return "DETECTHEAD";
  }
  return "?";
}

inline std::optional<NodeKind> parse_node_kind(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  for (int i = 0; i <= static_cast<int>(NodeKind::DetectHead); ++i) {
    const auto k = static_cast<NodeKind>(i);
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

/// What travels along an edge.
enum class EdgeType { Spike, Float, Prediction };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Conv;
  std::map<std::string, std::string> params;
  std::vector<std::string> inputs;
  int line = 0;

  bool has(const std::string& key) const { return params.count(key) != 0; }

  std::size_t get_size(const std::string& key, std::optional<std::size_t> fallback = {}) const {
    auto it = params.find(key);
    if (it == params.end()) {
      if (fallback) return *fallback;
      fail(ErrorKind::Config, where() + "missing required parameter '" + key + "'");
    }
    std::size_t v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      fail(ErrorKind::Config, where() + "parameter '" + key + "' is not a nonnegative integer");
    }
    return v;
  }

  double get_real(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::Config, where() + "parameter '" + key + "' is not a number");
    }
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  std::string where() const {
    return "node '" + id + "' (line " + std::to_string(line) + "): ";
  }
};

struct NetGraph {
  std::size_t t_steps = 4;
  std::vector<Node> nodes;

  std::optional<std::size_t> find(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return i;
    return std::nullopt;
  }

  const Node& encoder() const {
    for (const auto& n : nodes)
      if (n.kind == NodeKind::Encoder) return n;
    fail(ErrorKind::Config, "graph has no ENCODER");
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace detail

inline void validate_graph(NetGraph& graph);

/// Parses and validates a config. Throws config errors with line numbers.
inline NetGraph parse_graph(std::istream& in) {
  NetGraph g;
  bool have_tsteps = false;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (tokens[0].rfind("tsteps=", 0) == 0) {
      if (tokens.size() != 1) fail(ErrorKind::Config, where + "unexpected tokens after tsteps");
      const std::string v = tokens[0].substr(7);
      std::size_t t = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), t);
      if (ec != std::errc{} || ptr != v.data() + v.size() || t == 0) {
        fail(ErrorKind::Config, where + "tsteps must be a positive integer");
      }
      g.t_steps = t;
      have_tsteps = true;
      continue;
    }
    if (tokens[0] != "node" || tokens.size() < 3) {
      fail(ErrorKind::Config, where + "expected 'node <id> <kind> ...' or 'tsteps=<T>'");
    }
    Node node;
    node.id = tokens[1];
    node.line = line_no;
    auto kind = parse_node_kind(tokens[2]);
    if (!kind) fail(ErrorKind::Config, where + "unknown node kind '" + tokens[2] + "'");
    node.kind = *kind;
    for (std::size_t i = 3; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        fail(ErrorKind::Config, where + "expected key=value, got '" + tokens[i] + "'");
      }
      const std::string key = tokens[i].substr(0, eq);
      const std::string value = tokens[i].substr(eq + 1);
      if (key == "inputs") {
        node.inputs = detail::split_list(value, ',');
      } else if (!node.params.emplace(key, value).second) {
        fail(ErrorKind::Config, where + "duplicate parameter '" + key + "'");
      }
    }
    g.nodes.push_back(std::move(node));
  }
  if (!have_tsteps) fail(ErrorKind::Config, "config lacks a 'tsteps=<T>' header");
  validate_graph(g);
  return g;
}

inline NetGraph parse_graph(const std::string& text) {
  std::istringstream is(text);
  return parse_graph(is);
}

inline NetGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config '" + path.string() + "'");
  return parse_graph(in);
}

/// Static type and extent of one node's output. Predictions list one shape per scale.
struct NodeInfo {
  EdgeType type = EdgeType::Float;
  Shape shape;
  std::vector<Shape> predictions;
};

namespace detail {

inline std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                               const Node& n) {
  if (stride == 0 || k == 0) fail(ErrorKind::Config, n.where() + "kernel and stride must be positive");
  if (in + 2 * pad < k) fail(ErrorKind::Shape, n.where() + "kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

inline bool allowed_keys(const Node& n, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : n.params) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
      fail(ErrorKind::Config, n.where() + "unknown parameter '" + k + "' for " +
                                  std::string(to_string(n.kind)));
    }
  }
  return true;
}

}  // namespace detail

/// Types and shapes of every node for an image of `image_h` x `image_w`.
/// Spatial checks are skipped (h = w = 0 in the result) when both are zero.
inline std::vector<NodeInfo> infer_shapes(const NetGraph& g, std::size_t image_h, std::size_t image_w) {
  const bool spatial = image_h != 0 || image_w != 0;
  const std::size_t T = g.t_steps;
  std::vector<NodeInfo> info(g.nodes.size());
  auto input_info = [&](const Node& n, std::size_t i) -> const NodeInfo& {
    return info[*g.find(n.inputs[i])];
  };
  auto expect_inputs = [](const Node& n, std::size_t lo, std::size_t hi) {
    if (n.inputs.size() < lo || n.inputs.size() > hi) {
      fail(ErrorKind::Config, n.where() + std::string(to_string(n.kind)) + " takes " +
                                  (lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi)) +
                                  " input(s), got " + std::to_string(n.inputs.size()));
    }
  };
  auto expect_type = [](const Node& n, const NodeInfo& in, EdgeType type) {
    if (in.type != type) {
      fail(ErrorKind::Config, n.where() + "expects a " +
                                  std::string(type == EdgeType::Spike ? "spike" : "float") + " input");
    }
  };
  auto ext = [&](std::size_t in, std::size_t k, std::size_t s, std::size_t p, const Node& n) {
    return spatial ? detail::conv_extent(in, k, s, p, n) : std::size_t{0};
  };

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    NodeInfo& out = info[i];
    switch (n.kind) {
      case NodeKind::Encoder: {
        detail::allowed_keys(n, {"in", "out", "k", "stride", "pad"});
        expect_inputs(n, 0, 0);
        const std::size_t k = n.get_size("k", 3);
        const std::size_t s = n.get_size("stride", 1);
        const std::size_t p = n.get_size("pad", k / 2);
        out.type = EdgeType::Spike;
        out.shape = {T, n.get_size("out"), ext(image_h, k, s, p, n), ext(image_w, k, s, p, n)};
        break;
      }
      case NodeKind::Denoise: {
        detail::allowed_keys(n, {"downsample", "enable"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        expect_type(n, in, EdgeType::Spike);
        const std::string mode = n.get_string("downsample", "none");
        if (mode != "none" && mode != "maxpool2") {
          fail(ErrorKind::Config, n.where() + "downsample must be 'none' or 'maxpool2'");
        }
        const std::string enable = n.get_string("enable", "1");
        if (enable != "0" && enable != "1") fail(ErrorKind::Config, n.where() + "enable must be 0 or 1");
        out.type = EdgeType::Spike;
        out.shape = in.shape;
        if (mode == "maxpool2") {
          if (spatial && (in.shape.h < 2 || in.shape.w < 2)) {
            fail(ErrorKind::Shape, n.where() + "map too small for 2x2 downsampling");
          }
          out.shape.h /= 2;
          out.shape.w /= 2;
        }
        break;
      }
      case NodeKind::Conv: {
        detail::allowed_keys(n, {"out", "k", "stride", "pad"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        if (in.type == EdgeType::Prediction) fail(ErrorKind::Config, n.where() + "cannot consume predictions");
        const std::size_t k = n.get_size("k", 3);
        const std::size_t s = n.get_size("stride", 1);
        const std::size_t p = n.get_size("pad", k / 2);
        out.type = EdgeType::Float;
        out.shape = {T, n.get_size("out"), ext(in.shape.h, k, s, p, n), ext(in.shape.w, k, s, p, n)};
        break;
      }
      case NodeKind::SeBN: {
        detail::allowed_keys(n, {"n"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        expect_type(n, in, EdgeType::Float);
        out = in;
        break;
      }
      case NodeKind::If: {
        detail::allowed_keys(n, {"vth"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        expect_type(n, in, EdgeType::Float);
        out = in;
        out.type = EdgeType::Spike;
        break;
      }
      case NodeKind::SuBlock1:
      case NodeKind::SuBlock2: {
        detail::allowed_keys(n, {"out", "k"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        expect_type(n, in, EdgeType::Spike);
        const std::size_t c = n.get_size("out");
        if (c % 2 != 0 || c == 0) fail(ErrorKind::Config, n.where() + "out must be a positive even count");
        const std::size_t k = n.get_size("k", 3);
        const std::size_t s = n.kind == NodeKind::SuBlock1 ? 2 : 1;
        out.type = EdgeType::Spike;
        out.shape = {T, c, ext(in.shape.h, k, s, k / 2, n), ext(in.shape.w, k, s, k / 2, n)};
        break;
      }
      case NodeKind::SpikeSpp: {
        detail::allowed_keys(n, {"out", "mid", "k", "pool"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        expect_type(n, in, EdgeType::Spike);
        const std::size_t pool = n.get_size("pool", 5);
        if (pool % 2 == 0) fail(ErrorKind::Config, n.where() + "pool window must be odd");
        if (spatial && (pool > in.shape.h || pool > in.shape.w)) {
          fail(ErrorKind::Shape, n.where() + "pool window " + std::to_string(pool) +
                                     " larger than the " + std::to_string(in.shape.h) + "x" +
                                     std::to_string(in.shape.w) + " feature map");
        }
        const std::size_t k = n.get_size("k", 1);
        out.type = EdgeType::Spike;
        out.shape = {T, n.get_size("out"), ext(in.shape.h, k, 1, k / 2, n), ext(in.shape.w, k, 1, k / 2, n)};
        break;
      }
      case NodeKind::MaxPool: {
        detail::allowed_keys(n, {"k", "stride", "pad"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        if (in.type == EdgeType::Prediction) fail(ErrorKind::Config, n.where() + "cannot consume predictions");
        const std::size_t k = n.get_size("k", 2);
        const std::size_t s = n.get_size("stride", k);
        const std::size_t p = n.get_size("pad", 0);
        if (spatial && (k > in.shape.h || k > in.shape.w)) {
          fail(ErrorKind::Shape, n.where() + "pool window larger than feature map");
        }
        out = in;
        out.shape.h = ext(in.shape.h, k, s, p, n);
        out.shape.w = ext(in.shape.w, k, s, p, n);
        break;
      }
      case NodeKind::Upsample: {
        detail::allowed_keys(n, {"factor"});
        expect_inputs(n, 1, 1);
        const NodeInfo& in = input_info(n, 0);
        if (in.type == EdgeType::Prediction) fail(ErrorKind::Config, n.where() + "cannot consume predictions");
        const std::size_t f = n.get_size("factor", 2);
        if (f == 0) fail(ErrorKind::Config, n.where() + "factor must be positive");
        out = in;
        out.shape.h *= f;
        out.shape.w *= f;
        break;
      }
      case NodeKind::Concat:
      case NodeKind::Add: {
        detail::allowed_keys(n, {});
        expect_inputs(n, 2, 64);
        const NodeInfo& first = input_info(n, 0);
        if (n.kind == NodeKind::Add) expect_type(n, first, EdgeType::Float);
        if (first.type == EdgeType::Prediction) fail(ErrorKind::Config, n.where() + "cannot consume predictions");
        out = first;
        for (std::size_t j = 1; j < n.inputs.size(); ++j) {
          const NodeInfo& in = input_info(n, j);
          expect_type(n, in, first.type);
          if (in.shape.h != first.shape.h || in.shape.w != first.shape.w) {
            fail(ErrorKind::Shape, n.where() + "inputs differ in spatial extent");
          }
          if (n.kind == NodeKind::Add && in.shape.c != first.shape.c) {
            fail(ErrorKind::Shape, n.where() + "ADD inputs differ in channel count");
          }
          if (n.kind == NodeKind::Concat) out.shape.c += in.shape.c;
        }
        break;
      }
      case NodeKind::DetectHead: {
        detail::allowed_keys(n, {"classes", "box", "hidden"});
        expect_inputs(n, 2, 2);
        out.type = EdgeType::Prediction;
        const std::size_t channels = n.get_size("classes", 4) + n.get_size("box", 4);
        for (std::size_t j = 0; j < 2; ++j) {
          const NodeInfo& in = input_info(n, j);
          expect_type(n, in, EdgeType::Spike);
          out.predictions.push_back({1, channels, in.shape.h, in.shape.w});
        }
        break;
      }
    }
  }
  return info;
}

/// Builder rule: an SEBN node summed by an ADD takes n = number of summed branches.
inline void apply_branch_divisors(NetGraph& g) {
  std::map<std::string, std::size_t> assigned;
  for (const Node& n : g.nodes) {
    if (n.kind != NodeKind::Add) continue;
    for (const auto& in : n.inputs) {
      const Node& src = g.nodes[*g.find(in)];
      if (src.kind != NodeKind::SeBN) continue;
      auto [it, fresh] = assigned.emplace(in, n.inputs.size());
      if (!fresh && it->second != n.inputs.size()) {
        fail(ErrorKind::Config, src.where() + "feeds ADD nodes with different branch counts");
      }
    }
  }
  for (Node& n : g.nodes) {
    auto it = assigned.find(n.id);
    if (it == assigned.end()) continue;
    if (n.has("n") && n.get_size("n") != it->second) {
      fail(ErrorKind::Config, n.where() + "n=" + n.params["n"] + " contradicts the " +
                                  std::to_string(it->second) + "-branch residual sum it feeds");
    }
    n.params["n"] = std::to_string(it->second);
  }
}

inline void validate_graph(NetGraph& g) {
  if (g.t_steps == 0) fail(ErrorKind::Config, "tsteps must be >= 1");
  if (g.nodes.empty()) fail(ErrorKind::Config, "graph has no nodes");
  std::size_t encoders = 0;
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.kind == NodeKind::Encoder) ++encoders;
    for (const auto& in : n.inputs) {
      if (!seen.count(in)) {
        fail(ErrorKind::Config, n.where() + "input '" + in + "' is not defined earlier in the config");
      }
    }
    if (!seen.emplace(n.id, i).second) fail(ErrorKind::Config, n.where() + "duplicate node id");
  }
  if (encoders != 1) fail(ErrorKind::Config, "graph needs exactly one ENCODER, found " + std::to_string(encoders));
  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::SeBN && n.has("n") && n.get_size("n") == 0) {
      fail(ErrorKind::Config, n.where() + "n must be >= 1");
    }
  }
  infer_shapes(g, 0, 0);  // type checks and channel algebra
  apply_branch_divisors(g);
}

/// Consumers of each node, by index.
inline std::vector<std::vector<std::size_t>> consumers(const NetGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    for (const auto& in : g.nodes[i].inputs) out[*g.find(in)].push_back(i);
  return out;
}

/// A convolution (plus optional normalization) that owns named parameters.
struct UnitSpec {
  std::string name;       // conv records live under <name>.weight / <name>.bias
  std::string norm_name;  // norm records under <norm_name>.gamma|beta|mean|var
  std::size_t in = 0, out = 0, k = 1, stride = 1, pad = 0;
  NormKind norm = NormKind::None;
  std::size_t n = 1;
  std::size_t t_steps = 1;  // SeBN parameter rows
};

/// An SEBN node that is not folded into a preceding CONV.
struct LooseNormSpec {
  std::string name;
  std::size_t channels = 0;
  std::size_t n = 1;
  std::size_t t_steps = 1;
};

struct ParamLayout {
  std::vector<UnitSpec> units;
  std::vector<LooseNormSpec> loose_norms;
  // Index of the CONV node a SEBN node is merged into, if any.
  std::map<std::string, std::string> merged_norms;  // sebn id -> conv id
};

/// Every parameterized unit of the graph, in node order.
inline ParamLayout param_layout(const NetGraph& g) {
  const auto info = infer_shapes(g, 0, 0);
  const auto users = consumers(g);
  const std::size_t T = g.t_steps;
  ParamLayout layout;
  auto in_channels = [&](const Node& n, std::size_t j) { return info[*g.find(n.inputs[j])].shape.c; };
  auto sebn_unit = [&](std::string name, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                       std::size_t n) {
    UnitSpec u{name, name + ".sebn", in, out, k, stride, k / 2, NormKind::SeBN, n, T};
    layout.units.push_back(std::move(u));
  };

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    switch (n.kind) {
      case NodeKind::Encoder: {
        const std::size_t k = n.get_size("k", 3);
        layout.units.push_back(UnitSpec{n.id, n.id + ".bn", n.get_size("in", 3), n.get_size("out"), k,
                                        n.get_size("stride", 1), n.get_size("pad", k / 2),
                                        NormKind::BatchNorm, 1, 1});
        break;
      }
      case NodeKind::Conv: {
        const std::size_t k = n.get_size("k", 3);
        UnitSpec u{n.id, "", in_channels(n, 0), n.get_size("out"), k, n.get_size("stride", 1),
                   n.get_size("pad", k / 2), NormKind::None, 1, T};
        // A CONV whose only consumer is an SEBN reading only it runs as one unit.
        if (users[i].size() == 1) {
          const Node& next = g.nodes[users[i][0]];
          if (next.kind == NodeKind::SeBN) {
            u.norm = NormKind::SeBN;
            u.norm_name = next.id;
            u.n = next.get_size("n", 1);
            layout.merged_norms[next.id] = n.id;
          }
        }
        layout.units.push_back(std::move(u));
        break;
      }
      case NodeKind::SeBN: {
        if (!layout.merged_norms.count(n.id)) {
          layout.loose_norms.push_back({n.id, info[i].shape.c, n.get_size("n", 1), T});
        }
        break;
      }
      case NodeKind::SuBlock1: {
        const std::size_t in = in_channels(n, 0);
        const std::size_t c = n.get_size("out");
        const std::size_t k = n.get_size("k", 3);
        sebn_unit(n.id + ".conv_a", in, c, k, 2, 1);
        sebn_unit(n.id + ".conv_b", c / 2, c / 2, k, 1, 2);
        sebn_unit(n.id + ".shortcut", in, c / 2, k, 2, 2);
        break;
      }
      case NodeKind::SuBlock2: {
        const std::size_t in = in_channels(n, 0);
        const std::size_t c = n.get_size("out");
        const std::size_t k = n.get_size("k", 3);
        sebn_unit(n.id + ".conv_a", in, c, k, 1, 1);
        sebn_unit(n.id + ".conv_b", c / 2, c / 2, k, 1, 1);
        break;
      }
      case NodeKind::SpikeSpp: {
        const std::size_t in = in_channels(n, 0);
        const std::size_t mid = n.get_size("mid", std::max<std::size_t>(1, in / 2));
        const std::size_t k = n.get_size("k", 1);
        sebn_unit(n.id + ".conv_in", in, mid, k, 1, 1);
        sebn_unit(n.id + ".conv_out", 3 * mid, n.get_size("out"), k, 1, 1);
        break;
      }
      case NodeKind::DetectHead: {
        const std::size_t hidden = n.get_size("hidden", 64);
        const std::size_t box = n.get_size("box", 4);
        const std::size_t classes = n.get_size("classes", 4);
        if (box == 0 || classes == 0 || hidden == 0) {
          fail(ErrorKind::Config, n.where() + "classes, box and hidden must be positive");
        }
        for (std::size_t s = 0; s < 2; ++s) {
          const std::size_t in = in_channels(n, s);
          const std::string p = n.id + ".p" + std::to_string(s);
          // SeBN in the head divides by T to tame the accumulated readout.
          sebn_unit(p + ".box.hidden", in, hidden, 3, 1, T);
          sebn_unit(p + ".box.out", hidden, box, 1, 1, T);
          sebn_unit(p + ".cls.hidden", in, hidden, 3, 1, T);
          sebn_unit(p + ".cls.out", hidden, classes, 1, 1, T);
        }
        break;
      }
      default: break;
    }
  }
  return layout;
}

}  // namespace spikedet

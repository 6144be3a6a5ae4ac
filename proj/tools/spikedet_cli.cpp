// Command-line front end: run, denoise, fuse, profile, gradcheck, dump-features
// and init-weights over the spikedet library.
//
// Exit codes: 0 success, 1 internal error or failed check, 2 usage/input error.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikedet/spikedet.hpp"

namespace fs = std::filesystem;
using namespace spikedet;

namespace {

struct ModelArgs {
  std::string config;
  std::string weights;
  bool random_weights = false;
  std::uint64_t seed = 0;
  std::size_t tsteps = 0;  // 0 keeps the config value
};

void add_model_options(CLI::App* cmd, ModelArgs& m, bool weights = true) {
  cmd->add_option("--config", m.config, "network config")->required();
  if (weights) {
    cmd->add_option("--weights", m.weights, "weights file (SUW1)");
    cmd->add_flag("--random-weights", m.random_weights, "use seeded random weights instead of a file");
  }
  cmd->add_option("--seed", m.seed, "seed for randomized verbs");
  cmd->add_option("--tsteps", m.tsteps, "override the config's time steps")->check(CLI::PositiveNumber);
}

NetGraph load_config(const ModelArgs& m) {
  NetGraph g = load_graph(m.config);
  if (m.tsteps != 0) {
    g.t_steps = m.tsteps;
    validate_graph(g);
  }
  return g;
}

WeightStore load_weights(const ModelArgs& m, const NetGraph& g) {
  if (m.random_weights) {
    if (!m.weights.empty()) fail(ErrorKind::Config, "--weights and --random-weights are exclusive");
    return random_weights(g, m.seed);
  }
  if (m.weights.empty()) fail(ErrorKind::Weights, "no weights given (use --weights or --random-weights)");
  try {
    return read_weights(m.weights);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io || e.kind() == ErrorKind::Format) {
      fail(ErrorKind::Weights, std::string("cannot load '") + m.weights + "': " + e.what());
    }
    throw;
  }
}

FloatTensor image_from_tensor_file(const fs::path& path) {
  AnyTensor any = read_tensor(path);
  FloatTensor img = std::holds_alternative<FloatTensor>(any) ? std::get<FloatTensor>(any)
                                                             : cast<float>(std::get<SpikeTensor>(any));
  if (img.shape().t != 1) fail(ErrorKind::Shape, "image tensor must have t = 1, got " + img.shape().str());
  return img;
}

/// One PGM (gray, replicated to three channels), three PGMs (one per channel)
/// or a tensor file.
FloatTensor load_image(const std::vector<std::string>& inputs) {
  if (inputs.size() == 1) {
    const fs::path p = inputs.front();
    if (p.extension() == ".sut") return image_from_tensor_file(p);
    return gray_to_image(read_pgm(p), 3);
  }
  if (inputs.size() == 3) {
    std::vector<FloatTensor> planes;
    for (const auto& in : inputs) planes.push_back(gray_to_image(read_pgm(in), 1));
    const FloatTensor* parts[] = {&planes[0], &planes[1], &planes[2]};
    for (const auto* p : parts) {
      if (p->shape() != planes[0].shape()) fail(ErrorKind::Shape, "channel images differ in size");
    }
    return concat_channels<float>(parts);
  }
  fail(ErrorKind::Config, "--input takes one image or tensor file, or three channel PGMs");
}

bool is_input_file(const fs::path& p) { return p.extension() == ".pgm" || p.extension() == ".sut"; }

void print_trace(const Trace& trace) {
  for (const FireRecord& f : trace.fires) std::cout << "rate " << f.name << ' ' << f.rate() << '\n';
}

int cmd_run(const ModelArgs& m, const std::vector<std::string>& inputs, const std::string& out_dir,
            bool show_trace) {
  NetGraph g = load_config(m);
  const WeightStore w = load_weights(m, g);
  const Network net(g, w);
  const FloatTensor image = load_image(inputs);
  Trace trace;
  ForwardOptions opt;
  if (show_trace) opt.trace = &trace;
  const auto outputs = net.forward(image, opt);
  fs::create_directories(out_dir);
  for (const auto& o : outputs) {
    if (!all_finite(o.value)) fail(ErrorKind::Internal, "output '" + o.name + "' is not finite");
    const fs::path path = fs::path(out_dir) / (o.name + ".sut");
    write_tensor(o.value, path);
    std::cout << path.string() << ' ' << o.value.shape().str() << '\n';
  }
  if (show_trace) print_trace(trace);
  return 0;
}

int cmd_denoise(const std::string& in, const std::string& out, const std::string& downsample) {
  const GrayImage img = read_pgm(in);
  std::vector<std::uint8_t> bits(img.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const auto v = img.pixels[i];
    if (v != 0 && v != img.maxval) {
      fail(ErrorKind::Validation, "pixel " + std::to_string(i) + " is neither 0 nor maxval; the input must be binary");
    }
    bits[i] = v != 0;
  }
  const SpikeTensor plane(Shape{1, 1, img.height, img.width}, std::move(bits));
  DenoiseConfig cfg;
  if (downsample == "maxpool2") {
    cfg.downsample = DenoiseDownsample::MaxPool2;
  } else if (downsample != "none") {
    fail(ErrorKind::Config, "--downsample must be 'none' or 'maxpool2'");
  }
  DenoiseCost cost;
  to_pgm(spike_denoise(plane, cfg, &cost), 0, 0, out);
  std::cout << "additions " << cost.total() << '\n';
  return 0;
}

int cmd_fuse(const ModelArgs& m, const std::string& out) {
  NetGraph g = load_config(m);
  const WeightStore w = load_weights(m, g);
  const WeightStore fused = fuse_weights(g, w);
  write_weights(fused, out);
  std::cout << "wrote " << fused.size() << " records to " << out << '\n';
  return 0;
}

int cmd_profile(const ModelArgs& m, const std::vector<std::string>& inputs, std::size_t size, bool json) {
  NetGraph g = load_config(m);
  const WeightStore w = load_weights(m, g);
  const Network net(g, w);
  std::vector<FloatTensor> images;
  if (inputs.empty()) {
    if (size == 0) fail(ErrorKind::Config, "profile needs --input or --size");
    images.emplace_back(Shape{1, 3, size, size});
  } else if (inputs.size() == 1 && fs::is_directory(inputs.front())) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(inputs.front())) {
      if (e.is_regular_file() && is_input_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorKind::Io, "no .pgm or .sut inputs in '" + inputs.front() + "'");
    for (const auto& f : files) images.push_back(load_image({f.string()}));
  } else {
    images.push_back(load_image(inputs));
  }
  std::vector<ProfileReport> reports;
  for (const auto& img : images) reports.push_back(profile(net, img));
  const ProfileReport r = average(reports);
  if (json) {
    std::cout << to_json(r).dump(2) << '\n';
  } else {
    std::cout << to_text(r);
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, bool json) {
  const GradCheckReport r = run_gradcheck(seed, instances);
  if (json) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"name", e.name}, {"count", e.count}, {"max_rel_error", e.max_rel_error}});
    }
    std::cout << nlohmann::json{{"seed", seed}, {"tolerance", r.tolerance}, {"worst", r.worst()},
                                {"pass", r.pass()}, {"entries", entries}}
                     .dump(2)
              << '\n';
  } else {
    for (const auto& e : r.entries) {
      std::cout << e.name << " n=" << e.count << " max_rel_error=" << e.max_rel_error << '\n';
    }
    std::cout << (r.pass() ? "PASS" : "FAIL") << " worst=" << r.worst() << " tolerance=" << r.tolerance << '\n';
  }
  return r.pass() ? 0 : 1;
}

int cmd_dump(const ModelArgs& m, const std::vector<std::string>& inputs, const std::string& out_dir,
             std::size_t limit) {
  NetGraph g = load_config(m);
  const WeightStore w = load_weights(m, g);
  const Network net(g, w);
  const FloatTensor image = load_image(inputs);
  fs::create_directories(out_dir);
  std::size_t written = 0;
  std::map<std::string, std::size_t> per_layer;
  const EdgeObserver observer = [&](const std::string& name, const SpikeTensor* s, const FloatTensor*) {
    if (!s) return;
    std::size_t& count = per_layer[name];
    for (std::size_t t = 0; t < s->shape().t && count < limit; ++t) {
      for (std::size_t c = 0; c < s->shape().c && count < limit; ++c) {
        to_pgm(*s, t, c, fs::path(out_dir) / (name + "_t" + std::to_string(t) + "_c" + std::to_string(c) + ".pgm"));
        ++count;
        ++written;
      }
    }
  };
  ForwardOptions opt;
  opt.observer = &observer;
  net.forward(image, opt);
  std::cout << "wrote " << written << " maps for " << per_layer.size() << " layers to " << out_dir << '\n';
  return 0;
}

int cmd_init(const ModelArgs& m, const std::string& out) {
  NetGraph g = load_config(m);
  const WeightStore w = random_weights(g, m.seed);
  write_weights(w, out);
  const Network net(g, w);
  std::cout << "wrote " << w.size() << " records (" << net.parameter_count() << " parameters) to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking object detector toolkit"};
  app.require_subcommand(1);

  ModelArgs m;
  std::vector<std::string> inputs;
  std::string out;
  std::string output;
  std::string downsample = "none";
  bool json = false;
  bool trace = false;
  std::size_t limit = 16;
  std::size_t size = 0;
  std::size_t instances = 20;

  auto* run = app.add_subcommand("run", "run the network and write the raw head outputs");
  add_model_options(run, m);
  run->add_option("--input", inputs, "image PGM, three channel PGMs, or tensor file")->required();
  run->add_option("--out", out, "output directory")->required();
  run->add_flag("--trace", trace, "print per-layer firing rates");

  auto* denoise = app.add_subcommand("denoise", "denoise a binary PGM");
  denoise->add_option("--input", output, "binary PGM")->required();
  denoise->add_option("--out", out, "output PGM")->required();
  denoise->add_option("--downsample", downsample, "none | maxpool2");

  auto* fuse = app.add_subcommand("fuse", "fold normalization into per-step conv weights");
  add_model_options(fuse, m);
  fuse->add_option("--out", out, "fused weights file")->required();

  auto* prof = app.add_subcommand("profile", "FLOPs, SOPs, parameters and energy");
  add_model_options(prof, m);
  prof->add_option("--input", inputs, "image, three channel PGMs, tensor file, or a directory to average");
  prof->add_option("--size", size, "profile a blank size x size image instead of --input");
  prof->add_flag("--json", json, "machine-readable report");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of the backward passes");
  grad->add_option("--seed", m.seed, "seed");
  grad->add_option("--instances", instances, "random conv and SeBN cases")->check(CLI::PositiveNumber);
  grad->add_flag("--json", json, "machine-readable report");

  auto* dump = app.add_subcommand("dump-features", "write spike maps as PGMs");
  add_model_options(dump, m);
  dump->add_option("--input", inputs, "image PGM, three channel PGMs, or tensor file")->required();
  dump->add_option("--out", out, "output directory")->required();
  dump->add_option("--limit", limit, "maximum maps per layer");

  auto* init = app.add_subcommand("init-weights", "write seeded random weights for a config");
  add_model_options(init, m, false);
  init->add_option("--out", out, "weights file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(m, inputs, out, trace);
    if (*denoise) return cmd_denoise(output, out, downsample);
    if (*fuse) return cmd_fuse(m, out);
    if (*prof) return cmd_profile(m, inputs, size, json);
    if (*grad) return cmd_gradcheck(m.seed, instances, json);
    if (*dump) return cmd_dump(m, inputs, out, limit);
    if (*init) return cmd_init(m, out);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.kind() == ErrorKind::Internal ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

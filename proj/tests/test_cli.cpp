#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikedet/tensor_io.hpp"
#include "spikedet/weights.hpp"

using namespace spikedet;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SPIKEDET_CLI;
const std::string kReference = std::string(SPIKEDET_SOURCE_DIR) + "/configs/reference.net";

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("spikedet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // A random 80x80 gray image, the smallest size the reference config accepts.
  std::string image(std::uint64_t seed = 1) const {
    std::mt19937_64 rng(seed);
    GrayImage img{80, 80, 255, {}};
    for (std::size_t i = 0; i < 80 * 80; ++i) img.pixels.push_back(static_cast<std::uint8_t>(rng()));
    const fs::path p = dir_ / ("img" + std::to_string(seed) + ".pgm");
    write_pgm(img, p);
    return p.string();
  }

  std::string model(const std::string& weights = "--random-weights --seed 3") const {
    return "--config '" + kReference + "' " + weights;
  }

  fs::path dir_;
};

FloatTensor read_output(const fs::path& p) { return read_tensor_as<float>(p); }

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("gradcheck --instances 0").code, 2);
}

TEST_F(Cli, MissingConfigIsIoError) {
  const Result r = run("profile --config " + path("nope.net").string() + " --random-weights --size 80");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error[io]"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingWeightsFileIsWeightsError) {
  const Result r = run("run " + model("--weights " + path("absent.suw").string()) + " --input " + image() +
                       " --out " + path("o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error[weights]"), std::string::npos) << r.err;
}

TEST_F(Cli, RunWritesBothHeadScales) {
  const Result r = run("run " + model() + " --input " + image() + " --out " + path("o").string() + " --trace");
  ASSERT_EQ(r.code, 0) << r.err;
  const FloatTensor p0 = read_output(path("o") / "head.p0.sut");
  const FloatTensor p1 = read_output(path("o") / "head.p1.sut");
  EXPECT_EQ(p0.shape(), (Shape{1, 8, 10, 10}));
  EXPECT_EQ(p1.shape(), (Shape{1, 8, 5, 5}));
  EXPECT_TRUE(all_finite(p0) && all_finite(p1));
  EXPECT_NE(r.out.find("rate enc "), std::string::npos);
}

TEST_F(Cli, RunIsDeterministic) {
  const std::string img = image();
  ASSERT_EQ(run("run " + model() + " --input " + img + " --out " + path("a").string()).code, 0);
  ASSERT_EQ(run("run " + model() + " --input " + img + " --out " + path("b").string()).code, 0);
  EXPECT_EQ(slurp(path("a") / "head.p0.sut"), slurp(path("b") / "head.p0.sut"));
  EXPECT_EQ(slurp(path("a") / "head.p1.sut"), slurp(path("b") / "head.p1.sut"));
}

TEST_F(Cli, FusedWeightsRunLikeUnfused) {
  const std::string raw = path("raw.suw").string();
  const std::string fused = path("fused.suw").string();
  ASSERT_EQ(run("init-weights --config '" + kReference + "' --seed 4 --out " + raw).code, 0);
  const Result f = run("fuse " + model("--weights " + raw) + " --out " + fused);
  ASSERT_EQ(f.code, 0) << f.err;

  const WeightStore store = read_weights(fused);
  EXPECT_TRUE(store.contains("b1.conv_a.weight.t3"));
  EXPECT_FALSE(store.contains("b1.conv_a.weight.t4"));
  EXPECT_FALSE(store.contains("b1.conv_a.sebn.gamma"));
  EXPECT_TRUE(store.require("enc.weight").fused);

  const std::string img = image(2);
  ASSERT_EQ(run("run " + model("--weights " + raw) + " --input " + img + " --out " + path("u").string()).code, 0);
  ASSERT_EQ(run("run " + model("--weights " + fused) + " --input " + img + " --out " + path("f").string()).code, 0);
  for (const char* name : {"head.p0.sut", "head.p1.sut"}) {
    const FloatTensor a = read_output(path("u") / name);
    const FloatTensor b = read_output(path("f") / name);
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = a.data()[i], y = b.data()[i];
      EXPECT_LE(std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y))), 1e-4);
    }
  }

  const Result again = run("fuse " + model("--weights " + fused) + " --out " + path("twice.suw").string());
  EXPECT_EQ(again.code, 2);
  EXPECT_NE(again.err.find("already fused"), std::string::npos) << again.err;
}

TEST_F(Cli, DumpFeaturesRespectsLimit) {
  const Result r = run("dump-features " + model() + " --input " + image() + " --out " + path("maps").string() +
                       " --limit 3");
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, int> per_edge;
  for (const auto& e : fs::directory_iterator(path("maps"))) {
    const std::string stem = e.path().stem().string();
    per_edge[stem.substr(0, stem.rfind("_t"))]++;
    const GrayImage img = read_pgm(e.path());
    for (auto v : img.pixels) ASSERT_TRUE(v == 0 || v == img.maxval);
  }
  EXPECT_GT(per_edge.size(), 10u);
  for (const auto& [edge, n] : per_edge) EXPECT_EQ(n, 3) << edge;
  EXPECT_EQ(per_edge.count("enc"), 1u);
}

TEST_F(Cli, GradcheckIsRepeatable) {
  const Result a = run("gradcheck --seed 11 --instances 5");
  const Result b = run("gradcheck --seed 11 --instances 5");
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("PASS"), std::string::npos);
  const Result j = run("gradcheck --seed 11 --instances 5 --json");
  ASSERT_EQ(j.code, 0);
  const auto doc = nlohmann::json::parse(j.out);
  EXPECT_TRUE(doc["pass"].get<bool>());
  EXPECT_EQ(doc["entries"].size(), 5u * 6 + 6);
}

TEST_F(Cli, ProfileJsonTotalsAddUp) {
  const Result r = run("profile " + model() + " --input " + image() + " --json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  double flops = 0, sops = 0;
  for (const auto& l : doc["layers"]) {
    flops += l["flops"].get<double>();
    sops += l["sops"].get<double>();
  }
  const auto& t = doc["totals"];
  EXPECT_DOUBLE_EQ(t["flops"].get<double>(), flops);
  EXPECT_DOUBLE_EQ(t["sops"].get<double>(), sops);
  EXPECT_NEAR(t["energy_mj"].get<double>(), (flops * 0.5 * 4.6 + sops * 0.9) * 1e-9, 1e-12);
  EXPECT_EQ(t["params"].get<std::size_t>(), 2880144u);
}

TEST_F(Cli, ProfileAveragesADirectory) {
  fs::create_directories(path("set"));
  for (std::uint64_t s : {5u, 6u}) fs::copy_file(image(s), path("set") / ("i" + std::to_string(s) + ".pgm"));
  const Result r = run("profile " + model() + " --input " + path("set").string() + " --json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["inputs"].get<int>(), 2);
  EXPECT_EQ(run("profile " + model() + " --size 80").code, 0);
}

TEST_F(Cli, DenoiseBinaryImage) {
  GrayImage img{8, 8, 255, std::vector<std::uint8_t>(64, 0)};
  img.pixels[3 * 8 + 4] = 255;
  write_pgm(img, path("in.pgm"));
  const Result r = run("denoise --input " + path("in.pgm").string() + " --out " + path("out.pgm").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_pgm(path("out.pgm")).pixels, std::vector<std::uint8_t>(64, 0));
  EXPECT_NE(r.out.find("additions 19"), std::string::npos) << r.out;

  img.pixels[0] = 7;
  write_pgm(img, path("gray.pgm"));
  const Result bad = run("denoise --input " + path("gray.pgm").string() + " --out " + path("x.pgm").string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("error[validation]"), std::string::npos) << bad.err;
}

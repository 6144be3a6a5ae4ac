#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "spikedet/denoiser.hpp"
#include "support.hpp"

using namespace spikedet;

namespace {

SpikeTensor plane_of(const oracle::Plane& p, std::size_t h, std::size_t w) {
  return SpikeTensor(Shape{1, 1, h, w}, std::vector<std::uint8_t>(p.begin(), p.end()));
}

oracle::Plane bits_of(const SpikeTensor& x) { return {x.data().begin(), x.data().end()}; }

}  // namespace

TEST(Denoiser, IsolatedOneIsRemoved) {
  oracle::Plane p(25, 0);
  p[12] = 1;
  const SpikeTensor out = spike_denoise(plane_of(p, 5, 5), {});
  EXPECT_EQ(bits_of(out), oracle::Plane(25, 0));
}

TEST(Denoiser, HoleInsideACrossIsFilled) {
  oracle::Plane p(25, 0);
  p[7] = p[11] = p[13] = p[17] = 1;  // 4-neighbours of the centre
  const SpikeTensor after_k1 = denoise_pass(plane_of(p, 5, 5), DenoiseKernel::K1);
  EXPECT_EQ(after_k1.data()[12], 1);
}

TEST(Denoiser, HoleInsideDiagonalsIsFilledByK2) {
  oracle::Plane p(25, 0);
  p[6] = p[8] = p[16] = p[18] = 1;
  EXPECT_EQ(denoise_pass(plane_of(p, 5, 5), DenoiseKernel::K1).data()[12], 0);
  EXPECT_EQ(denoise_pass(plane_of(p, 5, 5), DenoiseKernel::K2).data()[12], 1);
}

TEST(Denoiser, UniformPlanesMatchBruteForce) {
  for (int v : {0, 1}) {
    const oracle::Plane p(64, v);
    EXPECT_EQ(bits_of(spike_denoise(plane_of(p, 8, 8), {})), oracle::denoise(p, 8, 8));
  }
  EXPECT_EQ(bits_of(spike_denoise(plane_of(oracle::Plane(64, 0), 8, 8), {})), oracle::Plane(64, 0));
}

TEST(Denoiser, PassesReadTheUnmodifiedPreviousPlane) {
  // A row of alternating holes: in-place updates would cascade along the row.
  const oracle::Plane p = {1, 1, 1, 1, 1, 1, 1,  //
                           1, 0, 1, 0, 1, 0, 1,  //
                           1, 1, 1, 1, 1, 1, 1};
  EXPECT_EQ(bits_of(denoise_pass(plane_of(p, 3, 7), DenoiseKernel::K1)),
            (oracle::Plane{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}));
}

TEST(Denoiser, MatchesBruteForceOnRandomPlanes) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const double density = std::uniform_real_distribution<double>(0.02, 0.98)(rng);
    const oracle::Plane p = oracle::random_bits(rng, 256, density);
    ASSERT_EQ(bits_of(spike_denoise(plane_of(p, 16, 16), {})), oracle::denoise(p, 16, 16)) << "trial " << trial;
  }
}

TEST(Denoiser, MatchesBruteForceOnOddShapes) {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 9);
    const int w = 1 + static_cast<int>(rng() % 9);
    const oracle::Plane p = oracle::random_bits(rng, static_cast<std::size_t>(h * w));
    ASSERT_EQ(bits_of(spike_denoise(plane_of(p, h, w), {})), oracle::denoise(p, h, w));
  }
}

TEST(Denoiser, DownsampleIsMaxPoolOfDenoised) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const oracle::Plane p = oracle::random_bits(rng, 256, 0.3);
    DenoiseConfig cfg;
    cfg.downsample = DenoiseDownsample::MaxPool2;
    const SpikeTensor out = spike_denoise(plane_of(p, 16, 16), cfg);
    ASSERT_EQ(out.shape(), (Shape{1, 1, 8, 8}));
    EXPECT_EQ(bits_of(out), oracle::maxpool2(oracle::denoise(p, 16, 16), 16, 16));
  }
}

TEST(Denoiser, PlanesAreIndependent) {
  std::mt19937_64 rng(104);
  const SpikeTensor x = support::random_spikes(rng, Shape{3, 2, 10, 12});
  const SpikeTensor out = spike_denoise(x, {});
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      const oracle::Plane p(x.plane(t, c).begin(), x.plane(t, c).end());
      const oracle::Plane got(out.plane(t, c).begin(), out.plane(t, c).end());
      EXPECT_EQ(got, oracle::denoise(p, 10, 12));
    }
  }
}

TEST(Denoiser, CostCountsActiveTaps) {
  // A single 1 in the middle of a 5x5 plane: K1 touches it from 5 windows
  // (4 neighbours plus its own centre), K2 from 5, and K3 (all nonzero) from 9.
  oracle::Plane p(25, 0);
  p[12] = 1;
  DenoiseCost cost;
  spike_denoise(plane_of(p, 5, 5), {}, &cost);
  EXPECT_EQ(cost.pass_adds[0], 5u);
  EXPECT_EQ(cost.pass_adds[1], 5u);
  EXPECT_EQ(cost.pass_adds[2], 9u);
  EXPECT_EQ(cost.total(), 19u);
}

TEST(Denoiser, SecondPassMayDiffer) {
  // The filter is not idempotent; applying it twice is not the same as once.
  std::mt19937_64 rng(105);
  bool found = false;
  for (int trial = 0; trial < 2000 && !found; ++trial) {
    const oracle::Plane p = oracle::random_bits(rng, 36, 0.5);
    const oracle::Plane once = oracle::denoise(p, 6, 6);
    found = oracle::denoise(once, 6, 6) != once;
  }
  EXPECT_TRUE(found);
}

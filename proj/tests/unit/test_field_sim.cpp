#include <gtest/gtest.h>

#include <cmath>

#include "streamcl/errors.hpp"
#include "streamcl/field_sim.hpp"

using namespace streamcl;

namespace {

SimConfig noiseless() {
  SimConfig c;
  c.noise_std = 0.0;
  return c;
}

}  // namespace

TEST(FieldSim, ZeroAmplitudeWithoutNoiseIsZero) {
  SimConfig c = noiseless();
  c.amplitude = 0.0;
  const FieldFrame f = generate_frame(c, 3);
  ASSERT_EQ(f.values.size(), 16u * 16u * 16u);
  for (float v : f.values) EXPECT_EQ(v, 0.0f);
}

TEST(FieldSim, FrameMetadata) {
  const FieldFrame f = generate_frame(SimConfig{}, 5);
  EXPECT_EQ(f.step_index, 5u);
  EXPECT_EQ(f.dims, Dims::cube(16));
  for (float v : f.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(FieldSim, EnvelopePeakTracksPacketCenter) {
  const SimConfig c = noiseless();
  for (std::size_t t = 0; t < c.steps; ++t) {
    const FieldFrame f = generate_frame(c, t);
    const double center = c.packet_center + c.velocity * static_cast<double>(t);
    ASSERT_GE(center, 0.0);
    ASSERT_LE(center, static_cast<double>(c.grid_size - 1));
    std::size_t best_z = 0;
    double best = -1.0;
    for (std::size_t z = 0; z < c.grid_size; ++z) {
      double m = 0.0;
      for (std::size_t x = 0; x < c.grid_size; ++x)
        for (std::size_t y = 0; y < c.grid_size; ++y) m = std::max(m, std::abs(double(f.at(x, y, z))));
      if (m > best) {
        best = m;
        best_z = z;
      }
    }
    EXPECT_LE(std::abs(static_cast<double>(best_z) - center), 1.0) << "t=" << t;
  }
}

TEST(FieldSim, DeterministicAndOrderIndependent) {
  SimConfig c;
  c.seed = 42;
  const FieldFrame a = generate_frame(c, 4);
  generate_frame(c, 1);
  generate_frame(c, 7);
  const FieldFrame b = generate_frame(c, 4);
  EXPECT_TRUE(a.identical(b));

  c.seed = 43;
  EXPECT_FALSE(a.identical(generate_frame(c, 4)));
}

TEST(FieldSim, EnvelopeBound) {
  for (double amp : {1.0, -2.5, 0.3}) {
    SimConfig c = noiseless();
    c.amplitude = amp;
    for (std::size_t t = 0; t < c.steps; ++t) {
      for (float v : generate_frame(c, t).values) EXPECT_LE(std::abs(double(v)), std::abs(amp) + 1e-6);
    }
  }
}

TEST(FieldSim, TranslationAlongZ) {
  SimConfig c = noiseless();
  c.velocity = 2.0;
  for (std::size_t t = 0; t + 1 < c.steps; ++t) {
    const FieldFrame now = generate_frame(c, t);
    const FieldFrame next = generate_frame(c, t + 1);
    for (std::size_t x = 0; x < c.grid_size; ++x)
      for (std::size_t y = 0; y < c.grid_size; ++y)
        for (std::size_t z = 2; z < c.grid_size; ++z) {
          EXPECT_NEAR(next.at(x, y, z), now.at(x, y, z - 2), 1e-5);
        }
  }
}

TEST(FieldSim, NoiseStatistics) {
  SimConfig c;
  c.amplitude = 0.0;
  c.noise_std = 0.5;
  c.grid_size = 32;
  const FieldFrame f = generate_frame(c, 0);
  double mean = 0.0;
  for (float v : f.values) mean += v;
  mean /= static_cast<double>(f.values.size());
  double var = 0.0;
  for (float v : f.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.values.size() - 1);
  // 32768 samples: standard error of the mean is 0.5 / 181 ~ 0.003.
  EXPECT_NEAR(mean, 0.0, 0.015);
  EXPECT_NEAR(std::sqrt(var), 0.5, 0.015);
}

TEST(FieldSim, OutOfRangeStep) {
  const SimConfig c;
  EXPECT_THROW(generate_frame(c, c.steps), OutOfRangeError);
}

TEST(FieldSim, InvalidConfigRejected) {
  SimConfig c;
  c.grid_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SimConfig{};
  c.sigma_r = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SimConfig{};
  c.noise_std = -1.0;
  EXPECT_THROW(generate_frame(c, 0), ConfigError);
  c = SimConfig{};
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "oracles.hpp"
#include "streamcl/autoencoder.hpp"
#include "streamcl/errors.hpp"

using namespace streamcl;

namespace {

ArchSpec tiny_arch() { return ArchSpec{4, {2}, 2}; }

Volume random_volume(std::size_t side, std::mt19937_64& rng, double scale = 1.0) {
  Volume v(Dims::cube(side));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& x : v.values) x = u(rng);
  return v;
}

LatentCode random_latent(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  LatentCode e;
  e.values.resize(n);
  for (double& x : e.values) x = u(rng);
  return e;
}

}  // namespace

TEST(Arch, Validation) {
  EXPECT_NO_THROW(ArchSpec{}.validate());
  EXPECT_THROW((ArchSpec{12, {8, 16, 32}, 32}.validate()), ConfigError);
  EXPECT_THROW((ArchSpec{16, {}, 32}.validate()), ConfigError);
  EXPECT_THROW((ArchSpec{16, {8}, 0}.validate()), ConfigError);
  EXPECT_THROW(Autoencoder(ArchSpec{6, {2, 2}, 2}), ConfigError);
}

TEST(Arch, ParameterCountMatchesShapeWalk) {
  for (const ArchSpec& a : {ArchSpec{}, tiny_arch(), ArchSpec{32, {4, 8}, 64}, ArchSpec{2, {1}, 3}}) {
    const Autoencoder model(a);
    const std::size_t expected = oracle::count_parameters(a.input_dim, a.channels, a.latent_dim);
    EXPECT_EQ(model.parameter_count(), expected);
    EXPECT_EQ(parameter_count(a), expected);
    EXPECT_EQ(model.init_params(1).flat.size(), expected);
  }
  EXPECT_EQ(Autoencoder(ArchSpec{}).parameter_count(), 51745u);
}

TEST(Params, PartitionCoversFlatView) {
  const Autoencoder model{ArchSpec{}};
  const ParamSet p = model.init_params(3);
  std::size_t total = 0;
  std::size_t expected_offset = 0;
  for (const auto& seg : p.partition) {
    EXPECT_EQ(seg.offset, expected_offset);
    std::size_t len = 1;
    for (auto d : seg.shape) len *= d;
    EXPECT_EQ(seg.length, len) << seg.name;
    total += seg.length;
    expected_offset += seg.length;
  }
  EXPECT_EQ(total, p.flat.size());
  EXPECT_GE(p.partition.size(), 6u);
  EXPECT_EQ(p.partition.size(), 16u);
}

TEST(Params, TensorRoundTripIsBitExact) {
  const Autoencoder model{ArchSpec{}};
  const ParamSet p = model.init_params(9);
  const ParamSet back = ParamSet::from_tensors(p.to_tensors(), p.partition);
  ASSERT_EQ(back.flat.size(), p.flat.size());
  EXPECT_EQ(std::memcmp(back.flat.data(), p.flat.data(), p.flat.size() * sizeof(double)), 0);
  auto tensors = p.to_tensors();
  tensors[0].pop_back();
  EXPECT_THROW(ParamSet::from_tensors(tensors, p.partition), ShapeError);
}

TEST(Params, InitIsDeterministicWithZeroBiases) {
  const Autoencoder model{ArchSpec{}};
  const ParamSet a = model.init_params(7);
  const ParamSet b = model.init_params(7);
  EXPECT_EQ(a.flat, b.flat);
  EXPECT_NE(a.flat, model.init_params(8).flat);
  for (const auto& seg : a.partition) {
    if (!seg.name.ends_with(".bias")) continue;
    for (std::size_t i = 0; i < seg.length; ++i) EXPECT_EQ(a.flat[seg.offset + i], 0.0) << seg.name;
  }
}

TEST(Forward, ShapesAndDeterminism) {
  const Autoencoder model{ArchSpec{}};
  const ParamSet p = model.init_params(1);
  std::mt19937_64 rng(4);
  const Volume x = random_volume(16, rng);
  const LatentCode e = model.encode(p, x);
  EXPECT_EQ(e.values.size(), 32u);
  const LatentCode e2 = model.encode(p, x);
  EXPECT_EQ(std::memcmp(e.values.data(), e2.values.data(), e.values.size() * sizeof(double)), 0);
  const Volume y = model.decode(p, e);
  EXPECT_EQ(y.dims, x.dims);
  for (double v : y.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Forward, ZeroParamsPropagateZero) {
  const Autoencoder model{ArchSpec{}};
  const ParamSet zero = model.zero_params();
  std::mt19937_64 rng(5);
  for (double v : model.encode(zero, random_volume(16, rng)).values) EXPECT_EQ(v, 0.0);
  for (double v : model.decode(zero, random_latent(32, rng)).values) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ShapeErrors) {
  const Autoencoder model(tiny_arch());
  const ParamSet p = model.init_params(1);
  EXPECT_THROW(model.encode(p, Volume(Dims::cube(8))), ShapeError);
  EXPECT_THROW(model.decode(p, LatentCode{{1.0, 2.0, 3.0}}), ShapeError);
  const Autoencoder other{ArchSpec{}};
  EXPECT_THROW(other.encode(p, Volume(Dims::cube(16))), ShapeError);
  EXPECT_THROW((void)model.recon_loss(p, {}), ShapeError);
  EXPECT_THROW(model.grad_latent_cycle(p, {}), ShapeError);
}

TEST(ReconLoss, SingleVoxelDifference) {
  const Autoencoder model(tiny_arch());
  Volume x(Dims::cube(4));
  x.at(1, 2, 3) = 0.75;  // zero params reconstruct 0 everywhere
  const std::vector<Volume> batch{x};
  EXPECT_DOUBLE_EQ(model.recon_loss(model.zero_params(), batch), 0.75 * 0.75 / 64.0);
}

TEST(ReconLoss, ExactReconstructionIsZero) {
  const Autoencoder model(tiny_arch());
  const std::vector<Volume> batch{Volume(Dims::cube(4))};
  const auto lg = model.grad_recon(model.zero_params(), batch);
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grad.flat) EXPECT_EQ(g, 0.0);
}

TEST(ReconLoss, MatchesBruteForceVoxelSum) {
  const Autoencoder model(ArchSpec{2, {1}, 3});
  std::mt19937_64 rng(6);
  const ParamSet p = model.init_params(2);
  const std::vector<Volume> batch{random_volume(2, rng), random_volume(2, rng)};
  double expected = 0.0;
  for (const Volume& x : batch) {
    const Volume y = model.reconstruct(p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 2; ++k) s += std::pow(y.at(i, j, k) - x.at(i, j, k), 2);
    expected += s / 8.0;
  }
  expected /= 2.0;
  EXPECT_NEAR(model.recon_loss(p, batch), expected, 1e-15);
  EXPECT_NEAR(model.grad_recon(p, batch).loss, expected, 1e-15);
}

TEST(ReconGradient, MatchesFiniteDifferences) {
  const Autoencoder model(tiny_arch());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const ParamSet p = model.init_params(seed);
    const std::vector<Volume> batch{random_volume(4, rng)};
    const auto analytic = model.grad_recon(p, batch).grad.flat;
    const auto fd = oracle::finite_difference([&](const ParamSet& q) { return model.recon_loss(q, batch); }, p);
    EXPECT_LE(oracle::relative_error(analytic, fd), 1e-4) << "seed " << seed;
  }
}

TEST(ReconGradient, DefaultArchSpotCheck) {
  const Autoencoder model{ArchSpec{}};
  std::mt19937_64 rng(11);
  const ParamSet p = model.init_params(11);
  const std::vector<Volume> batch{random_volume(16, rng)};
  const auto analytic = model.grad_recon(p, batch).grad.flat;
  // One coordinate from every tensor.
  for (const auto& seg : p.partition) {
    const std::size_t i = seg.offset + seg.length / 2;
    ParamSet q = p;
    const double h = 1e-5;
    q.flat[i] += h;
    const double up = model.recon_loss(q, batch);
    q.flat[i] -= 2 * h;
    const double down = model.recon_loss(q, batch);
    const double fd = (up - down) / (2 * h);
    EXPECT_NEAR(analytic[i], fd, 1e-4 * std::max(std::abs(fd), 1e-4)) << seg.name;
  }
}

TEST(ReconGradient, BatchIsMeanOfSingles) {
  const Autoencoder model(tiny_arch());
  std::mt19937_64 rng(8);
  const ParamSet p = model.init_params(8);
  const Volume a = random_volume(4, rng);
  const Volume b = random_volume(4, rng);
  const std::vector<Volume> both{a, b};
  const auto ga = model.grad_recon(p, std::span(&a, 1)).grad.flat;
  const auto gb = model.grad_recon(p, std::span(&b, 1)).grad.flat;
  const auto gab = model.grad_recon(p, both).grad.flat;
  for (std::size_t i = 0; i < gab.size(); ++i) EXPECT_NEAR(gab[i], 0.5 * (ga[i] + gb[i]), 1e-14);
}

TEST(CycleLoss, ZeroCases) {
  const Autoencoder model(tiny_arch());
  const std::vector<LatentCode> zero{LatentCode{{0.0, 0.0}}};
  const auto lg = model.grad_latent_cycle(model.zero_params(), zero);
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grad.flat) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(model.latent_cycle_loss(model.zero_params(), zero), 0.0);
}

TEST(CycleLoss, MatchesBruteForceComponentSum) {
  const Autoencoder model(ArchSpec{4, {2}, 4});
  std::mt19937_64 rng(12);
  const ParamSet p = model.init_params(12);
  std::vector<LatentCode> latents;
  for (int i = 0; i < 3; ++i) latents.push_back(random_latent(4, rng));
  double expected = 0.0;
  for (const auto& e : latents) {
    const LatentCode c = model.encode(p, model.decode(p, e));
    for (std::size_t j = 0; j < 4; ++j) expected += (c.values[j] - e.values[j]) * (c.values[j] - e.values[j]);
  }
  expected /= 3.0;
  EXPECT_NEAR(model.latent_cycle_loss(p, latents), expected, 1e-15);
  EXPECT_NEAR(model.grad_latent_cycle(p, latents).loss, expected, 1e-15);
}

TEST(CycleGradient, MatchesFiniteDifferences) {
  const Autoencoder model(tiny_arch());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const ParamSet p = model.init_params(seed);
    const std::vector<LatentCode> latents{random_latent(2, rng), random_latent(2, rng)};
    const auto analytic = model.grad_latent_cycle(p, latents).grad.flat;
    const auto fd =
        oracle::finite_difference([&](const ParamSet& q) { return model.latent_cycle_loss(q, latents); }, p);
    EXPECT_LE(oracle::relative_error(analytic, fd), 1e-4) << "seed " << seed;
  }
}

TEST(CycleGradient, CoversEncoderAndDecoder) {
  const Autoencoder model(tiny_arch());
  std::mt19937_64 rng(13);
  const ParamSet p = model.init_params(13);
  const std::vector<LatentCode> latents{random_latent(2, rng)};
  const auto g = model.grad_latent_cycle(p, latents).grad;
  bool enc = false;
  bool dec = false;
  for (std::size_t s = 0; s < g.partition.size(); ++s) {
    const auto& seg = g.partition[s];
    double norm = 0.0;
    for (std::size_t i = 0; i < seg.length; ++i) norm += std::abs(g.flat[seg.offset + i]);
    if (seg.name.starts_with("enc.") && norm > 0) enc = true;
    if (seg.name.starts_with("dec.") && norm > 0) dec = true;
  }
  EXPECT_TRUE(enc);
  EXPECT_TRUE(dec);
}

TEST(CycleGradient, BatchIsMeanOfSingles) {
  const Autoencoder model(tiny_arch());
  std::mt19937_64 rng(14);
  const ParamSet p = model.init_params(14);
  const LatentCode a = random_latent(2, rng);
  const LatentCode b = random_latent(2, rng);
  const std::vector<LatentCode> both{a, b};
  const auto ga = model.grad_latent_cycle(p, std::span(&a, 1)).grad.flat;
  const auto gb = model.grad_latent_cycle(p, std::span(&b, 1)).grad.flat;
  const auto gab = model.grad_latent_cycle(p, both).grad.flat;
  for (std::size_t i = 0; i < gab.size(); ++i) EXPECT_NEAR(gab[i], 0.5 * (ga[i] + gb[i]), 1e-14);
}

namespace {

ParamSet scalar_param(double v) { return ParamSet{{v}, {ParamSegment{"w", {1}, 0, 1}}}; }

}  // namespace

TEST(Adam, ZeroGradientLeavesParams) {
  const Autoencoder model(tiny_arch());
  ParamSet p = model.init_params(1);
  const ParamSet before = p;
  AdamState st;
  apply_update(p, GradientVector{std::vector<double>(p.flat.size(), 0.0), p.partition}, st, AdamHyper{});
  EXPECT_EQ(p.flat, before.flat);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // t=1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  ParamSet p = scalar_param(0.5);
  AdamState st;
  apply_update(p, GradientVector{{1.0}, p.partition}, st, AdamHyper{0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(0.5 - p.flat[0], 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, SecondStepMatchesHandRecurrence) {
  ParamSet p = scalar_param(0.0);
  AdamState st;
  const AdamHyper h{0.01, 0.9, 0.999, 1e-8};
  apply_update(p, GradientVector{{2.0}, p.partition}, st, h);
  apply_update(p, GradientVector{{-1.0}, p.partition}, st, h);
  const double m = 0.1 * 0.9 * 2.0 + 0.1 * -1.0;             // 0.08
  const double v = 0.001 * 0.999 * 4.0 + 0.001 * 1.0;        // 0.004996
  const double step2 = 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.998001)) + 1e-8);
  const double step1 = 0.01 * 2.0 / (2.0 + 1e-8);
  EXPECT_NEAR(p.flat[0], -step1 - step2, 1e-14);
}

TEST(Adam, DeterministicAndRejectsNonFinite) {
  ParamSet a = scalar_param(1.0);
  ParamSet b = scalar_param(1.0);
  AdamState sa, sb;
  apply_update(a, GradientVector{{0.3}, a.partition}, sa, AdamHyper{});
  apply_update(b, GradientVector{{0.3}, b.partition}, sb, AdamHyper{});
  EXPECT_EQ(a.flat, b.flat);

  const ParamSet before = a;
  const AdamState st_before = sa;
  EXPECT_THROW(apply_update(a, GradientVector{{std::nan("")}, a.partition}, sa, AdamHyper{}), NumericError);
  EXPECT_EQ(a.flat, before.flat);
  EXPECT_EQ(sa.step, st_before.step);
  EXPECT_EQ(sa.m, st_before.m);
}

TEST(Params, RoundToFloat) {
  const ParamSet p = scalar_param(0.1);
  EXPECT_EQ(round_to_float(p).flat[0], static_cast<double>(0.1f));
}

#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace mhd25;
using mhd25::support::max_diff;
using mhd25::support::random_band_field;

namespace {

const double kPi = std::numbers::pi;
const BesovParams kB01{0.0, 2, Summation::One, FrequencyRange::All};

TEST(LittlewoodPaley, ProfileValues) {
  const auto fam = build_cutoffs();
  EXPECT_EQ(fam.psi(0.5), 0.0);
  EXPECT_EQ(fam.chi(1.5), 0.0);
  EXPECT_EQ(fam.chi(0.75), 1.0);
  EXPECT_EQ(fam.psi(1.5), 1.0);
  EXPECT_EQ(fam.psi(3.0), 0.0);
}

TEST(LittlewoodPaley, PartitionOfUnity) {
  const auto fam = build_cutoffs();
  EXPECT_NEAR(fam.partition_sum(1.0), 1.0, 1e-10);
  EXPECT_LE(fam.partition_defect(1e-4, 1e4, 20001), 1e-10);
}

TEST(LittlewoodPaley, BlockOfSingleModeAtPlateauIsIdentity) {
  // |k| = 1.5 * 2^j with k on the lattice: L = 2pi/0.375 puts m = 4 at 1.5.
  const auto g = make_grid(32, 2 * kPi / 0.375);
  const double k = 4 * g->k_fundamental();
  ASSERT_NEAR(k, 1.5, 1e-14);
  const auto f = SpectralField::sample(g, [&](double x, double) { return std::cos(k * x); });
  EXPECT_LE(max_diff(block(f, 0).field, f), 1e-13);
  EXPECT_LE(block(f, 1).field.max_abs(), 1e-13);
}

TEST(LittlewoodPaley, BlockOfConstantVanishes) {
  const auto g = make_grid(32, 2 * kPi);
  const auto f = SpectralField::constant(g, 4.0);
  const auto lv = resolvable_levels(*g);
  for (int j = lv.j_min; j <= lv.j_max; ++j) EXPECT_EQ(block(f, j).field.max_abs(), 0.0);
}

TEST(LittlewoodPaley, ReconstructionIdentity) {
  const auto g = make_grid(32, 8 * kPi);
  const auto lv = resolvable_levels(*g);
  for (int s = 0; s < 10; ++s) {
    const auto f = random_band_field(g, 40 + s, 15) + SpectralField::constant(g, 0.7);
    SpectralField sum = SpectralField::zeros(g);
    for (int j = lv.j_min; j <= lv.j_max; ++j) sum += block(f, j).field;
    EXPECT_LE(max_diff(sum, f - SpectralField::constant(g, f.mean())), 1e-10);
  }
}

TEST(LittlewoodPaley, UnresolvableLevelIsFlagged) {
  const auto g = make_grid(16, 2 * kPi);
  const auto f = random_band_field(g, 1);
  EXPECT_FALSE(block(f, 20).resolvable);
  EXPECT_EQ(block(f, 20).field.max_abs(), 0.0);
}

TEST(LittlewoodPaley, BesovNormOfCosine) {
  const auto g = make_grid(32, 2 * kPi);
  const auto f = SpectralField::sample(g, [](double x, double) { return std::cos(x); });
  const auto fam = build_cutoffs();
  double expected = 0.0;
  for (int j = -3; j <= 3; ++j) expected += fam.psi(std::ldexp(1.0, -j)) / std::sqrt(2.0);
  EXPECT_NEAR(besov_norm(f, kB01), expected, 1e-13);
  EXPECT_LE(besov_norm(f, kB01), 1.0 / std::sqrt(2.0) * (1 + 1e-12) * 2);
}

TEST(LittlewoodPaley, ZeroFieldAndHomogeneity) {
  const auto g = make_grid(32, 4 * kPi);
  const auto z = SpectralField::zeros(g);
  const auto f = random_band_field(g, 9, 10);
  for (double s : {-1.0, 0.0, 2.0}) {
    for (auto r : {Summation::One, Summation::Infinity}) {
      for (auto range : {FrequencyRange::All, FrequencyRange::Low, FrequencyRange::High}) {
        const BesovParams p{s, 2, r, range};
        EXPECT_EQ(besov_norm(z, p), 0.0);
        EXPECT_NEAR(besov_norm(3.0 * f, p), 3.0 * besov_norm(f, p), 1e-12 * besov_norm(f, p) + 1e-300);
        EXPECT_NEAR(besov_norm(-1.0 * f, p), besov_norm(f, p), 1e-12 * besov_norm(f, p) + 1e-300);
      }
    }
  }
}

TEST(LittlewoodPaley, OnlyP2Supported) {
  const auto g = make_grid(16, 2 * kPi);
  EXPECT_THROW(besov_norm(SpectralField::zeros(g), BesovParams{0, 1}), DomainError);
}

TEST(LittlewoodPaley, LowHighSplit) {
  // Modes |k| <= 1/4 are entirely low; |k| >= 4 entirely high.
  const auto g = make_grid(64, 16 * kPi);
  const double kf = g->k_fundamental();
  const auto lowf = SpectralField::sample(g, [&](double x, double y) { return std::cos(kf * x) + std::sin(2 * kf * y); });
  auto [l1, h1] = low_high_split(lowf);
  EXPECT_LE(h1.max_abs(), 1e-10);
  EXPECT_LE(max_diff(l1, lowf), 1e-10);
  const auto highf = SpectralField::sample(g, [&](double x, double) { return std::cos(40 * kf * x); });
  auto [l2, h2] = low_high_split(highf);
  EXPECT_LE(l2.max_abs(), 1e-10);
  EXPECT_LE(max_diff(h2, highf), 1e-10);
  const auto f = random_band_field(g, 3, 20);
  auto [l3, h3] = low_high_split(f);
  EXPECT_LE(max_diff(l3 + h3, f), 1e-10);
}

TEST(LittlewoodPaley, CheminLernerConstantSequence) {
  const auto g = make_grid(32, 4 * kPi);
  const auto f = random_band_field(g, 11, 8);
  const std::vector<double> t = {0.0, 0.5, 1.0, 1.5, 2.0};
  const std::vector<SpectralField> seq(t.size(), f);
  EXPECT_NEAR(chemin_lerner_norm(t, seq, Summation::Infinity, kB01), besov_norm(f, kB01), 1e-13);
  EXPECT_NEAR(chemin_lerner_norm(t, seq, Summation::One, kB01), 2.0 * besov_norm(f, kB01), 1e-12);
}

TEST(LittlewoodPaley, CheminLernerBelowTimeIntegralOfNorms) {
  const auto g = make_grid(32, 4 * kPi);
  for (int s = 0; s < 10; ++s) {
    std::vector<double> t;
    std::vector<SpectralField> seq;
    for (int i = 0; i < 6; ++i) {
      t.push_back(0.2 * i);
      seq.push_back(random_band_field(g, 1000 * s + i, 10));
    }
    const double cl = chemin_lerner_norm(t, seq, Summation::One, kB01);
    double trap = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      trap += 0.5 * (t[i] - t[i - 1]) * (besov_norm(seq[i], kB01) + besov_norm(seq[i - 1], kB01));
    }
    EXPECT_LE(cl, trap * (1 + 1e-12));
  }
}

TEST(LittlewoodPaley, CheminLernerRejectsBadSampling) {
  const auto g = make_grid(16, 2 * kPi);
  const std::vector<SpectralField> seq(3, SpectralField::zeros(g));
  const std::vector<double> uneven = {0.0, 0.1, 0.5};
  EXPECT_THROW(chemin_lerner_norm(uneven, seq, Summation::One, kB01), DomainError);
  const std::vector<double> short_t = {0.0, 0.1};
  EXPECT_THROW(chemin_lerner_norm(short_t, seq, Summation::One, kB01), DimensionMismatch);
}

TEST(LittlewoodPaley, CommutatorWithConstantVelocityVanishes) {
  const auto g = make_grid(32, 4 * kPi);
  const VectorField w = {SpectralField::constant(g, 1.3), SpectralField::constant(g, -0.4)};
  const auto f = random_band_field(g, 2, 6);
  const auto lv = resolvable_levels(*g);
  for (int j = lv.j_min; j <= lv.j_max; ++j) EXPECT_LE(block_commutator(w, f, j).max_abs(), 1e-11);
  EXPECT_EQ(block_commutator(w, SpectralField::zeros(g), 0).max_abs(), 0.0);
}

TEST(LittlewoodPaley, CommutatorConstantIsStableAcrossSeeds) {
  const auto g = make_grid(32, 8 * kPi);
  const auto lv = resolvable_levels(*g);
  std::vector<double> c;
  for (int s = 0; s < 100; ++s) {
    const auto f = random_smooth_field(g, 500 + 3 * s);
    const VectorField w = {random_smooth_field(g, 501 + 3 * s), random_smooth_field(g, 502 + 3 * s)};
    double lhs = 0.0;
    for (int j = lv.j_min; j <= lv.j_max; ++j) lhs = std::max(lhs, std::exp2(j) * block_commutator(w, f, j).l2_norm());
    const double rhs = besov_norm(w, {2, 2, Summation::One, FrequencyRange::All}) *
                       besov_norm(f, {1, 2, Summation::Infinity, FrequencyRange::All});
    c.push_back(lhs / rhs);
  }
  std::sort(c.begin(), c.end());
  EXPECT_GT(c.front(), 0.0);
  EXPECT_LE(c.back(), 4.0 * c[c.size() / 2]);
}

TEST(LittlewoodPaley, PropertySuitePasses) {
  LpSuiteConfig cfg;
  cfg.seeds = 20;
  for (const auto& r : run_lp_suite(cfg)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

}  // namespace

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "support.hpp"

using namespace mhd25;
using mhd25::support::random_band_field;

namespace {

const double kPi = std::numbers::pi;

TEST(SpectralGrid, ConstantFieldHasOnlyZeroMode) {
  const auto g = make_grid(32, 2 * kPi);
  const auto f = transform(g, std::vector<double>(g->num_points(), 2.5));
  EXPECT_NEAR(f.coefficients()[0].real(), 2.5, 1e-14);
  for (std::size_t i = 1; i < g->spectral_size(); ++i) EXPECT_LT(std::abs(f.coefficients()[i]), 1e-14);
}

TEST(SpectralGrid, SingleHarmonicGivesConjugatePair) {
  const auto g = make_grid(32, 4 * kPi);
  const double k = g->k_fundamental();
  const auto f = SpectralField::sample(g, [&](double x, double) { return std::cos(k * x); });
  EXPECT_NEAR(std::abs(f.coefficient(1, 0) - Complex(0.5, 0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(f.coefficient(-1, 0) - Complex(0.5, 0)), 0.0, 1e-14);
  int nonzero = 0;
  for (std::size_t i = 0; i < g->spectral_size(); ++i) nonzero += std::abs(f.coefficients()[i]) > 1e-13;
  EXPECT_EQ(nonzero, 1);  // the half spectrum stores (1, 0) once
}

TEST(SpectralGrid, RoundTripOverManySeeds) {
  const auto g = make_grid(32, 2 * kPi);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    std::vector<double> v(g->num_points());
    for (auto& x : v) x = U(rng);
    const auto f = transform(g, v);
    const auto back = inverse_transform(g, Spectrum(f.coefficients().begin(), f.coefficients().end()));
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(back.values()[i] - v[i]));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(SpectralGrid, ParsevalHolds) {
  const auto g = make_grid(64, 2 * kPi);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  std::vector<double> v(g->num_points());
  for (auto& x : v) x = N(rng);
  const auto [phys, spec] = parseval_sums(transform(g, v));
  EXPECT_NEAR(phys, spec, 1e-12 * phys);
}

TEST(SpectralGrid, DerivativeOfSine) {
  const auto g = make_grid(64, 6 * kPi);
  const double k = g->k_fundamental();
  const auto f = SpectralField::sample(g, [&](double x, double) { return std::sin(k * x); });
  const auto exact = SpectralField::sample(g, [&](double x, double) { return k * std::cos(k * x); });
  EXPECT_LE(support::max_diff(partial(f, 0), exact), 1e-12);
  EXPECT_LE(partial(f, 1).max_abs(), 1e-12);
}

TEST(SpectralGrid, LaplacianOfConstantIsZero) {
  const auto g = make_grid(16, 2 * kPi);
  const auto L = laplacian(SpectralField::constant(g, 3.0));
  EXPECT_EQ(L.max_abs(), 0.0);
}

TEST(SpectralGrid, FractionalLambdaOnSingleMode) {
  const auto g = make_grid(32, 8 * kPi);
  const double k = g->k_fundamental();
  const auto f = SpectralField::sample(g, [&](double x, double) { return std::cos(k * x); });
  EXPECT_LE(support::max_diff(fractional_lambda(f, 1.0), k * f), 1e-13);
  EXPECT_LE(support::max_diff(fractional_lambda(f, -0.5), std::pow(k, -0.5) * f), 1e-13);
  EXPECT_THROW(fractional_lambda(f + SpectralField::constant(g, 1.0), -0.5), DomainError);
  EXPECT_THROW(fractional_lambda(f, 1.5), DomainError);
}

TEST(SpectralGrid, DealiasKeepsLowAndKillsHighModes) {
  const auto g = make_grid(32, 2 * kPi);
  const auto low = SpectralField::sample(g, [](double x, double y) { return std::cos(3 * x) + std::sin(5 * y); });
  EXPECT_LE(support::max_diff(dealias(low), low), 1e-14);
  const auto high = SpectralField::sample(g, [](double x, double) { return std::cos(14 * x); });
  EXPECT_LE(dealias(high).max_abs(), 1e-14);
}

TEST(SpectralGrid, DealiasIsIdempotent) {
  const auto g = make_grid(32, 2 * kPi);
  for (int s = 0; s < 20; ++s) {
    const auto f = random_band_field(g, 100 + s, 15);
    const auto d = dealias(f);
    EXPECT_LE(support::max_diff(dealias(d), d), 1e-15);
  }
}

TEST(SpectralGrid, ProductAndAdvectAgreeWithPointwise) {
  const auto g = make_grid(32, 2 * kPi);
  const auto f = SpectralField::sample(g, [](double x, double) { return std::sin(x); });
  const auto h = SpectralField::sample(g, [](double, double y) { return std::cos(2 * y); });
  const auto exact = SpectralField::sample(g, [](double x, double y) { return std::sin(x) * std::cos(2 * y); });
  EXPECT_LE(support::max_diff(product(f, h), exact), 1e-13);
  const VectorField w = {SpectralField::constant(g, 2.0), SpectralField::zeros(g)};
  const auto adv = SpectralField::sample(g, [](double x, double) { return 2 * std::cos(x); });
  EXPECT_LE(support::max_diff(advect(w, f), adv), 1e-13);
}

TEST(SpectralGrid, MismatchedGridsAreRejected) {
  const auto a = SpectralField::zeros(make_grid(16, 2 * kPi));
  const auto b = SpectralField::zeros(make_grid(32, 2 * kPi));
  EXPECT_THROW(a + b, DimensionMismatch);
  EXPECT_THROW(product(a, b), DimensionMismatch);
}

TEST(SpectralGrid, OddDerivativeDropsNyquist) {
  const auto g = make_grid(16, 2 * kPi);
  const auto f = SpectralField::sample(g, [](double x, double) { return std::cos(8 * x); });
  EXPECT_LE(partial(f, 0).max_abs(), 1e-14);
}

TEST(SpectralGrid, SnapshotRoundTrip) {
  const auto g = make_grid(16, 4 * kPi);
  const auto a = random_band_field(g, 5);
  const auto b = random_band_field(g, 6);
  const std::array<const SpectralField*, 2> fs = {&a, &b};
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  write_snapshot(ss, fs);
  const auto back = read_snapshot(ss, g);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(support::max_diff(back[0], a), 0.0);
  EXPECT_EQ(support::max_diff(back[1], b), 0.0);
  std::stringstream bad("not a snapshot");
  EXPECT_THROW(read_snapshot(bad, g), FormatError);
}

}  // namespace

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "support.hpp"

using namespace mhd25;
using mhd25::support::random_band_field;

namespace {

const double kPi = std::numbers::pi;

MhdState random_state(const GridPtr& g, std::uint64_t seed, double amp) {
  MhdState s = MhdState::zeros(g);
  s.a = random_band_field(g, seed, 6, amp);
  s.u = {random_band_field(g, seed + 1, 6, amp), random_band_field(g, seed + 2, 6, amp)};
  s.theta = random_band_field(g, seed + 3, 6, amp);
  s.b = random_band_field(g, seed + 4, 6, amp);
  return s;
}

MhdState scaled(MhdState s, double c) {
  for (auto* f : {&s.a, &s.u[0], &s.u[1], &s.theta, &s.b}) *f *= c;
  return s;
}

TEST(Diagnostics, ZeroStateGivesZeros) {
  const auto g = make_grid(32, 8 * kPi);
  const auto z = MhdState::zeros(g);
  EXPECT_EQ(energy_E(z), 0.0);
  EXPECT_EQ(dissipation_D(z), 0.0);
  EXPECT_EQ(smallness_X0(z), 0.0);
  EXPECT_EQ(negative_besov_Y(z, 1.0), 0.0);
  const auto L = localized_lyapunov(to_reformulated(z), -1);
  EXPECT_EQ(L.L2, 0.0);
  EXPECT_EQ(L.L2_tilde, 0.0);
}

// With phi passed explicitly every piece is a norm of a field scaled by 2.
TEST(Diagnostics, FunctionalsAreHomogeneous) {
  const auto g = make_grid(32, 8 * kPi);
  const auto s = random_state(g, 10, 0.01);
  const auto phi = compute_phi(s.a, s.theta, s.b);
  const auto s2 = scaled(s, 2.0);
  const auto phi2 = 2.0 * phi;
  EXPECT_NEAR(energy_E(s2, phi2), 2.0 * energy_E(s, phi), 1e-12 * energy_E(s, phi));
  EXPECT_NEAR(dissipation_D(s2, phi2), 2.0 * dissipation_D(s, phi), 1e-12 * dissipation_D(s, phi));
  EXPECT_NEAR(smallness_X0(s2), 2.0 * smallness_X0(s), 1e-12 * smallness_X0(s));
  EXPECT_NEAR(negative_besov_Y(s2, phi2, 0.5), 2.0 * negative_besov_Y(s, phi, 0.5), 1e-12);
  EXPECT_THROW(negative_besov_Y(s, 1.5), DomainError);
}

TEST(Diagnostics, LowFrequencyVelocityOnlyEnergy) {
  // |k| = 1/8: purely low frequency.
  const auto g = make_grid(32, 16 * kPi);
  MhdState s = MhdState::zeros(g);
  const double k = g->k_fundamental();
  s.u[0] = SpectralField::sample(g, [&](double x, double) { return 1e-3 * std::cos(k * x); });
  const double expected = besov_norm(s.u, {0, 2, Summation::One, FrequencyRange::Low});
  EXPECT_NEAR(energy_E(s), expected, 1e-15);
  EXPECT_NEAR(expected, 1e-3 / std::sqrt(2.0), 1e-15);
}

TEST(Diagnostics, LocalizedLyapunovVelocityOnly) {
  const auto g = make_grid(32, 16 * kPi);
  const auto z = SpectralField::zeros(g);
  const VectorField u = {random_band_field(g, 3, 10), random_band_field(g, 4, 10)};
  for (int j = -3; j <= 0; ++j) {
    const auto L = localized_lyapunov(z, u, z, j, 0.1, LyapunovRegime::Low);
    const double bu = block(u[0], j).field.energy() + block(u[1], j).field.energy();
    EXPECT_NEAR(L.L2, 0.5 * bu, 1e-14 * std::max(1.0, bu));
  }
  EXPECT_THROW(localized_lyapunov(z, u, z, 0, 0.3, LyapunovRegime::Low), DomainError);
  EXPECT_THROW(localized_lyapunov(z, u, z, 0, 0.0, LyapunovRegime::Low), DomainError);
}

TEST(Diagnostics, LocalizedLyapunovEquivalence) {
  const auto g = make_grid(64, 16 * kPi);
  const auto lv = resolvable_levels(*g);
  double lo = INFINITY, hi = 0.0;
  for (int s = 0; s < 100; ++s) {
    const auto phi = random_smooth_field(g, 7000 + 4 * s);
    const VectorField u = {random_smooth_field(g, 7001 + 4 * s), random_smooth_field(g, 7002 + 4 * s)};
    const auto th = random_smooth_field(g, 7003 + 4 * s);
    for (int j = lv.j_min; j <= 0; ++j) {
      const double e = block_energy(phi, u, th, j);
      if (e <= 0.0) continue;
      const double r = localized_lyapunov(phi, u, th, j, 0.1, LyapunovRegime::Low).L2 / e;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  EXPECT_GE(lo, 0.11);
  EXPECT_LE(hi, 0.9);
}

TEST(Diagnostics, LambdaGammaNorm) {
  const auto g = make_grid(32, 8 * kPi);
  const double k = 2 * g->k_fundamental();
  const auto f = SpectralField::sample(g, [&](double x, double) { return std::cos(k * x); });
  const auto z = SpectralField::zeros(g);
  EXPECT_NEAR(lambda_gamma_norm(f, {z, z}, z, 0.0), 1 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(lambda_gamma_norm(f, {z, z}, z, -0.5), std::pow(k, -0.5) / std::sqrt(2.0), 1e-14);
  // The mean is ignored.
  EXPECT_NEAR(lambda_gamma_norm(f + SpectralField::constant(g, 3.0), {z, z}, z, 0.0), 1 / std::sqrt(2.0), 1e-14);
}

TEST(Diagnostics, FitDecaySyntheticSeries) {
  std::vector<double> t, v, w;
  for (int i = 0; i <= 200; ++i) {
    t.push_back(i);
    v.push_back(std::pow(1.0 + i, -0.5));
    w.push_back(3.7 * std::pow(1.0 + i, -0.75));
  }
  const auto f = fit_decay(t, v, {10, 200, 0});
  EXPECT_NEAR(f.exponent, -0.5, 1e-12);
  EXPECT_EQ(f.samples, 191u);
  EXPECT_NEAR(fit_decay(t, w, {10, 200, 0}).exponent, -0.75, 1e-12);
  EXPECT_NEAR(fit_decay(t, w, {10, 200, 0}).log_prefactor, std::log(3.7), 1e-12);
  EXPECT_EQ(fit_decay(t, v, {0, 200, 0.5}).samples, 100u);
}

TEST(Diagnostics, FitDecayRejectsBadWindows) {
  std::vector<double> t = {0, 1, 2, 3, 4, 5}, v = {1, 0.9, 0.8, 0.7, 0.6, 0.5};
  EXPECT_THROW(fit_decay(t, v, {0, 1, 0}), DomainError);   // fewer than 3 samples
  EXPECT_THROW(fit_decay(t, v, {0, 5, 0}), DomainError);   // under one decade
  std::vector<double> tt = {0, 5, 10, 20}, vv = {1, 0, 1, 1};
  EXPECT_THROW(fit_decay(tt, vv, {0, 20, 0}), DomainError);  // nonpositive
  EXPECT_THROW(fit_decay(t, std::vector<double>{1, 2}, {}), DimensionMismatch);
}

TEST(Diagnostics, HeatSemigroupSeriesDecaysAtHalf) {
  const auto g = make_grid(512, 128 * kPi);
  DecayEnvelopeSpec spec;
  spec.branch = EnvelopeBranch::Heat;
  std::vector<double> t;
  for (int i = 0; i <= 200; ++i) t.push_back(i);
  const auto env = decay_envelope(g, spec, t, false);
  EXPECT_NEAR(fit_decay(env.times, env.norms, {10, 200, 0}).exponent, -0.5, 0.03);
}

TEST(Diagnostics, LyapunovMonitor) {
  std::vector<double> t, v;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.1 * i);
    v.push_back(std::pow(1 + 0.1 * i, -2.0));
  }
  auto rep = lyapunov_monitor(t, v, 1.0, 0.0, 1e-12);
  EXPECT_TRUE(rep.non_increasing());
  EXPECT_GT(rep.c_tilde, 0.0);
  v[50] += 1e-3;
  rep = lyapunov_monitor(t, v, 1.0, 0.0, 1e-6);
  EXPECT_EQ(rep.violations.size(), 1u);
  EXPECT_TRUE(lyapunov_monitor(t, v, 1.0, 6.0, 1e-6).non_increasing());
}

TEST(Diagnostics, SeriesCsvRoundTrip) {
  const auto g = make_grid(16, 4 * kPi);
  DiagnosticSeries d;
  d.gammas = {0.0, -0.5};
  d.X0_ref = 0.125;
  for (int i = 0; i < 3; ++i) {
    auto s = random_state(g, 20 + i, 0.01);
    s.time = 0.5 * i;
    d.record(s, compute_phi(s.a, s.theta, s.b), Params{});
  }
  std::stringstream ss;
  d.write_csv(ss);
  const auto back = DiagnosticSeries::read_csv(ss);
  EXPECT_EQ(back.header(), d.header());
  EXPECT_EQ(back.X0_ref, d.X0_ref);
  for (const auto& name : d.header()) EXPECT_EQ(back.column(name), d.column(name)) << name;
  EXPECT_THROW(d.column("nope"), FormatError);
  std::stringstream bad("t,E\n0,1\n");
  EXPECT_THROW(DiagnosticSeries::read_csv(bad), FormatError);
}

TEST(Diagnostics, FunctionalXIsMonotoneInHorizon) {
  const auto g = make_grid(32, 8 * kPi);
  std::vector<double> t;
  std::vector<FieldBlocks> fb;
  for (int i = 0; i < 5; ++i) {
    const auto s = scaled(random_state(g, 50, 0.01), std::exp(-0.2 * i));
    t.push_back(0.5 * i);
    fb.push_back(field_blocks(s, compute_phi(s.a, s.theta, s.b)));
  }
  const double x3 = functional_X(std::span(t).first(3), std::span<const FieldBlocks>(fb).first(3));
  const double x5 = functional_X(t, fb);
  EXPECT_GT(x3, 0.0);
  EXPECT_GE(x5, x3);
}

TEST(InitialData, EquilibriumAndZeroAmplitude) {
  const auto g = make_grid(32, 8 * kPi);
  InitialDataSpec spec;
  EXPECT_EQ(smallness_X0(generate_initial(spec, g)), 0.0);
  spec.kind = InitialKind::RandomSpectrum;
  spec.amplitude = 0.0;
  EXPECT_EQ(smallness_X0(generate_initial(spec, g)), 0.0);
}

TEST(InitialData, SingleModeHasOneConjugatePair) {
  const auto g = make_grid(32, 8 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::SingleMode;
  spec.amplitude = 1e-3;
  spec.m1 = 2;
  spec.m2 = -3;
  const auto s = generate_initial(spec, g);
  for (const auto* f : {&s.a, &s.u[0], &s.u[1], &s.theta, &s.b}) {
    int nonzero = 0;
    for (const auto& c : f->coefficients()) nonzero += std::abs(c) > 1e-15;
    EXPECT_EQ(nonzero, 1);  // (2, -3) stored once; (-2, 3) is its conjugate
    EXPECT_GT(std::abs(f->coefficient(2, -3)), 4e-4);
  }
}

TEST(InitialData, EpsilonCalibration) {
  const auto g = make_grid(64, 16 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::RandomSpectrum;
  spec.epsilon = 1e-2;
  spec.seed = 12;
  const auto s = generate_initial(spec, g);
  EXPECT_NEAR(smallness_X0(s), 1e-2, 1e-4);
  spec.band_min = 100.0;
  spec.band_max = 200.0;
  EXPECT_THROW(generate_initial(spec, g), DomainError);
}

TEST(InitialData, GeneratorGivesFlatNegativeBesovBlocks) {
  const auto g = make_grid(512, 128 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::RandomSpectrum;
  spec.epsilon = 1e-3;
  spec.seed = 7;
  const auto s = generate_initial(spec, g);
  const auto bn = default_analysis(g)->block_norms(s.a);
  double lo = INFINITY, hi = 0.0;
  for (int j = -6; j <= -2; ++j) {
    const double w = std::exp2(-j) * bn.at(j);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  RecordProperty("ratio", std::to_string(hi / lo));
  EXPECT_LE(hi / lo, 2.0);
}

TEST(InitialData, SpecJsonRoundTripAndValidation) {
  InitialDataSpec spec;
  spec.kind = InitialKind::RandomSpectrum;
  spec.epsilon = 1e-3;
  spec.seed = 99;
  spec.band_max = 2.0;
  const auto back = InitialDataSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  EXPECT_THROW(InitialDataSpec::from_json({{"kind", "vortex"}}), FormatError);
  EXPECT_THROW(InitialDataSpec::from_json({{"kind", "file"}}), DomainError);
  EXPECT_THROW(InitialDataSpec::from_json({{"colour", 1}}), FormatError);
}

}  // namespace

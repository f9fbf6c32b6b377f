#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace mhd25;
using mhd25::support::max_diff;

namespace {

const double kPi = std::numbers::pi;

struct Mode {
  int m1, m2;
  GridPtr g;
  double k1() const { return m1 * g->k_fundamental(); }
  double k2() const { return m2 * g->k_fundamental(); }
  SpectralField field(double amp, double phase) const {
    const double a = k1(), b = k2();
    return SpectralField::sample(g, [&](double x, double y) { return amp * std::cos(a * x + b * y + phase); });
  }
};

ReformulatedState single_mode_reformulated(const Mode& m, double amp) {
  ReformulatedState s{m.field(amp, 0.3), {m.field(2 * amp, 1.2), m.field(-amp, 2.2)}, m.field(amp, 0.8),
                      SpectralField::zeros(m.g), 0.0};
  s.delta = s.phi;
  return s;
}

ModeAmplitudes amplitudes(const ReformulatedState& s, const Mode& m) {
  ModeAmplitudes a;
  a.phi = s.phi.coefficient(m.m1, m.m2);
  a.u = {s.u[0].coefficient(m.m1, m.m2), s.u[1].coefficient(m.m1, m.m2)};
  a.theta = s.theta.coefficient(m.m1, m.m2);
  return a;
}

double amp_error(const ModeAmplitudes& a, const ModeAmplitudes& b) {
  return std::abs(a.phi - b.phi) + std::abs(a.u[0] - b.u[0]) + std::abs(a.u[1] - b.u[1]) +
         std::abs(a.theta - b.theta);
}

SolverConfig base_config(double dt, double t_end, Formulation f) {
  SolverConfig c;
  c.dt = dt;
  c.t_end = t_end;
  c.formulation = f;
  c.keep_snapshots = false;
  c.diagnostic_stride = 1000000;
  return c;
}

TEST(Solver, ZeroStateStaysZero) {
  const auto g = make_grid(16, 2 * kPi);
  const auto z = MhdState::zeros(g);
  const auto s1 = step(z, 1e-3, SolverConfig{});
  EXPECT_EQ(s1.a.max_abs() + s1.u[0].max_abs() + s1.theta.max_abs() + s1.b.max_abs(), 0.0);
  const auto r1 = step(to_reformulated(z), 1e-2, SolverConfig{});
  EXPECT_EQ(r1.phi.max_abs() + r1.u[1].max_abs() + r1.delta.max_abs(), 0.0);
}

TEST(Solver, LinearOnlyStepMatchesSemigroup) {
  const auto g = make_grid(32, 4 * kPi);
  const Mode m{3, -2, g};
  const auto s0 = single_mode_reformulated(m, 1e-3);
  SolverConfig cfg;
  cfg.linear_only = true;
  const double dt = 0.05;
  const auto s1 = step(s0, dt, cfg);
  const auto exact = semigroup_evolve(amplitudes(s0, m), m.k1(), m.k2(), dt);
  EXPECT_LE(amp_error(amplitudes(s1, m), exact), 1e-12);
}

TEST(Solver, LinearOnlyRunMatchesSemigroupAtUnitTime) {
  const auto g = make_grid(32, 4 * kPi);
  const Mode m{1, 2, g};
  const auto s0 = single_mode_reformulated(m, 1e-3);
  auto cfg = base_config(1e-2, 1.0, Formulation::Reformulated);
  cfg.linear_only = true;
  cfg.keep_snapshots = true;
  cfg.snapshot_stride = 100;
  const auto tr = simulate(to_primitive(s0), cfg);
  ASSERT_EQ(tr.termination, Termination::Completed);
  const auto& last_phi = tr.phi_snapshots.back();
  const auto& last = tr.snapshots.back();
  const ReformulatedState end{last_phi, last.u, last.theta, SpectralField::zeros(g), 1.0};
  const auto exact = semigroup_evolve(amplitudes(s0, m), m.k1(), m.k2(), 1.0);
  EXPECT_LE(amp_error(amplitudes(end, m), exact), 1e-10);
}

double state_distance(const MhdState& a, const MhdState& b) {
  return (a.a - b.a).l2_norm() + (a.u[0] - b.u[0]).l2_norm() + (a.u[1] - b.u[1]).l2_norm() +
         (a.theta - b.theta).l2_norm() + (a.b - b.b).l2_norm();
}

MhdState final_state(const MhdState& init, double dt, Formulation f) {
  auto cfg = base_config(dt, 1.0, f);
  cfg.keep_snapshots = true;
  cfg.snapshot_stride = 1000000;
  const auto tr = simulate(init, cfg);
  EXPECT_EQ(tr.termination, Termination::Completed);
  return tr.snapshots.back();
}

double self_convergence_slope(Formulation f, const GridPtr& g) {
  const auto init = random_low_mode_state(g, 77, 0.05, 2);
  const std::vector<double> dts = {1e-2, 5e-3, 2.5e-3};
  const auto ref = final_state(init, 3.125e-4, f);
  std::vector<double> lx, ly;
  for (double dt : dts) {
    lx.push_back(std::log(dt));
    ly.push_back(std::log(state_distance(final_state(init, dt, f), ref)));
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

TEST(Solver, SecondOrderReformulated) {
  const double slope = self_convergence_slope(Formulation::Reformulated, make_grid(32, 2 * kPi));
  RecordProperty("slope", std::to_string(slope));
  EXPECT_NEAR(slope, 2.0, 0.1);
}

TEST(Solver, SecondOrderPrimitive) {
  const double slope = self_convergence_slope(Formulation::Primitive, make_grid(32, 8 * kPi));
  RecordProperty("slope", std::to_string(slope));
  EXPECT_NEAR(slope, 2.0, 0.1);
}

TEST(Solver, EquilibriumTrajectoryIsConstant) {
  const auto g = make_grid(16, 2 * kPi);
  auto cfg = base_config(1e-3, 0.1, Formulation::Both);
  cfg.diagnostic_stride = 10;
  const auto tr = simulate(MhdState::zeros(g), cfg);
  ASSERT_EQ(tr.termination, Termination::Completed);
  const auto& d = tr.diagnostics;
  ASSERT_EQ(d.size(), 11u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.E[i], 0.0);
    EXPECT_EQ(d.D[i], 0.0);
    EXPECT_EQ(d.Y[i], 0.0);
    EXPECT_EQ(d.lyapunov[i], 0.0);
    EXPECT_EQ(d.total_energy[i], d.total_energy[0]);
  }
  EXPECT_EQ(tr.max_abs_a, 0.0);
  EXPECT_EQ(tr.max_consistency_error(), 0.0);
}

TEST(Solver, SmallSingleModeStaysSmall) {
  const auto g = make_grid(32, 2 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::SingleMode;
  spec.amplitude = 1e-3;
  spec.m1 = 1;
  spec.m2 = 1;
  auto cfg = base_config(1e-3, 5.0, Formulation::Reformulated);
  cfg.enforce_smallness = true;
  const auto tr = simulate(generate_initial(spec, g), cfg);
  EXPECT_EQ(tr.termination, Termination::Completed);
  EXPECT_LE(tr.max_abs_a, 0.5);
  EXPECT_GT(tr.max_abs_a, 0.0);
}

TEST(Solver, DualFormulationsAgree) {
  const auto g = make_grid(32, 2 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::SingleMode;
  spec.amplitude = 1e-3;
  spec.m1 = 2;
  spec.m2 = 1;
  auto cfg = base_config(1e-3, 5.0, Formulation::Both);
  cfg.diagnostic_stride = 100;
  const auto tr = simulate(generate_initial(spec, g), cfg);
  ASSERT_EQ(tr.termination, Termination::Completed);
  EXPECT_EQ(tr.consistency_t.size(), 51u);
  EXPECT_LE(tr.max_consistency_error(), 1e-6);
}

TEST(Solver, MassAndEnergyConservation) {
  const auto g = make_grid(32, 2 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::RandomSpectrum;
  spec.amplitude = 1e-5;
  spec.band_max = 5.0;
  spec.seed = 3;
  auto init = generate_initial(spec, g);
  const double scale = 1e-3 / std::max({init.a.max_abs(), init.u[0].max_abs(), init.u[1].max_abs(),
                                        init.theta.max_abs(), init.b.max_abs()});
  for (auto* f : {&init.a, &init.u[0], &init.u[1], &init.theta, &init.b}) *f *= scale;
  auto cfg = base_config(1e-3, 1.0, Formulation::Primitive);
  cfg.dealias = false;
  cfg.diagnostic_stride = 50;
  const auto tr = simulate(init, cfg);
  ASSERT_EQ(tr.termination, Termination::Completed);
  const auto rep = conservation_report(tr);
  EXPECT_LE(rep.mass_a_drift, 1e-10 * rep.span);
  EXPECT_LE(rep.mass_b_drift, 1e-10 * rep.span);
  EXPECT_LE(rep.energy_relative_drift, 1e-6);
}

TEST(Solver, Deterministic) {
  const auto g = make_grid(32, 2 * kPi);
  const auto init = random_low_mode_state(g, 5, 0.01);
  auto cfg = base_config(1e-3, 0.05, Formulation::Both);
  cfg.diagnostic_stride = 10;
  const auto a = simulate(init, cfg);
  const auto b = simulate(init, cfg);
  std::ostringstream sa, sb;
  a.diagnostics.write_csv(sa);
  b.diagnostics.write_csv(sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Solver, ConfigValidation) {
  const auto g = make_grid(32, 2 * kPi);
  const auto z = MhdState::zeros(g);
  EXPECT_THROW(simulate(z, base_config(1e-2, 1.0, Formulation::Primitive)), DomainError);  // CFL
  EXPECT_NO_THROW(simulate(z, base_config(1e-2, 0.02, Formulation::Reformulated)));
  EXPECT_THROW(simulate(z, base_config(1e-3, 0.0105, Formulation::Primitive)), DomainError);
  EXPECT_THROW(simulate(z, base_config(-1e-3, 1.0, Formulation::Primitive)), DomainError);
  auto cfg = base_config(1e-3, 0.01, Formulation::Reformulated);
  cfg.params.kappa = 2.0;
  EXPECT_THROW(simulate(z, cfg), DomainError);
  EXPECT_THROW(formulation_from_string("hybrid"), FormatError);
}

TEST(Solver, SmallnessGuardStopsRun) {
  const auto g = make_grid(32, 2 * kPi);
  auto init = random_low_mode_state(g, 8, 0.3);
  auto cfg = base_config(1e-3, 0.01, Formulation::Reformulated);
  cfg.enforce_smallness = true;
  cfg.smallness_bound = 0.1;
  const auto tr = simulate(init, cfg);
  EXPECT_EQ(tr.termination, Termination::SmallnessViolation);
  EXPECT_EQ(tr.steps_taken, 1);
  EXPECT_GT(tr.max_abs_a, 0.1);
}

TEST(Solver, VacuumGuardAbortsRun) {
  const auto g = make_grid(32, 2 * kPi);
  MhdState s = MhdState::zeros(g);
  s.a = SpectralField::sample(g, [](double x, double) { return -0.85 * std::cos(x); });
  s.u[0] = SpectralField::sample(g, [](double x, double) { return 3.0 * std::sin(x); });
  auto cfg = base_config(1e-3, 1.0, Formulation::Primitive);
  const auto tr = simulate(s, cfg);
  EXPECT_EQ(tr.termination, Termination::VacuumAbort);
  EXPECT_LT(tr.steps_taken, 1000);
  EXPECT_FALSE(tr.message.empty());
}

TEST(Solver, LinearLyapunovIsNonIncreasing) {
  const auto g = make_grid(32, 8 * kPi);
  InitialDataSpec spec;
  spec.kind = InitialKind::RandomSpectrum;
  spec.epsilon = 1e-3;
  spec.band_max = 2.0;
  spec.seed = 4;
  auto cfg = base_config(1e-2, 2.0, Formulation::Reformulated);
  cfg.linear_only = true;
  cfg.diagnostic_stride = 1;
  const auto tr = simulate(generate_initial(spec, g), cfg);
  const auto rep = lyapunov_monitor(tr, 0.0, 1e-8);
  EXPECT_TRUE(rep.non_increasing()) << "max increase " << rep.max_increase;
}

}  // namespace

#pragma once

// Fixed-step integrating-factor midpoint scheme:
//
//   y*      = E(dt/2) [y + (dt/2) N(y)]
//   y_{n+1} = E(dt) y + dt E(dt/2) N(y*)
//
// E is the exact linear propagator (the full 3x3 symbol per shell for the
// reformulated system; viscous and heat multipliers for the primitive one)
// and N the explicit remainder. With N = 0 the step is exact; on the zero
// mode (E = I) it is the explicit midpoint rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mhd25/diagnostics.hpp"
#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"
#include "mhd25/linear_symbol.hpp"
#include "mhd25/mhd_state.hpp"

namespace mhd25 {

enum class Formulation { Primitive, Reformulated, Both };
enum class Termination { Completed, VacuumAbort, SmallnessViolation, NanAbort };

inline std::string to_string(Formulation f) {
  switch (f) {
    case Formulation::Primitive: return "primitive";
    case Formulation::Reformulated: return "reformulated";
    default: return "both";
  }
}

inline Formulation formulation_from_string(const std::string& s) {
  if (s == "primitive") return Formulation::Primitive;
  if (s == "reformulated") return Formulation::Reformulated;
  if (s == "both") return Formulation::Both;
  throw FormatError("unknown formulation '" + s + "'");
}

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::VacuumAbort: return "vacuum_abort";
    case Termination::SmallnessViolation: return "smallness_violation";
    default: return "nan_abort";
  }
}

struct SolverConfig {
  double dt = 1e-2;
  double t_end = 1.0;
  Formulation formulation = Formulation::Primitive;
  bool dealias = true;
  int snapshot_stride = 1;
  int diagnostic_stride = 1;
  std::uint64_t seed = 0;  // recorded for provenance; stepping is deterministic
  bool linear_only = false;
  bool keep_snapshots = true;
  bool record_diagnostics = true;
  /// Stop with smallness_violation once sup|a| exceeds smallness_bound.
  bool enforce_smallness = false;
  double smallness_bound = 0.5;
  double sigma = 1.0;
  std::vector<double> gammas = {0.0};
  Params params;

  bool integrates_explicit_linear_part() const { return formulation != Formulation::Reformulated; }

  long long num_steps() const {
    const double q = t_end / dt;
    const long long n = std::llround(q);
    if (std::abs(q - static_cast<double>(n)) > 1e-9 * std::max(1.0, q)) {
      throw DomainError("t_end must be an integer multiple of dt");
    }
    return n;
  }

  void validate(const Grid& g) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be >= 0");
    if (snapshot_stride < 1 || diagnostic_stride < 1) throw DomainError("strides must be >= 1");
    if (!(smallness_bound > 0.0)) throw DomainError("smallness_bound must be positive");
    params.validate();
    if (formulation != Formulation::Primitive) detail::require_normalized(params);
    if (integrates_explicit_linear_part()) {
      const double kmax = g.k_nyquist();
      if (dt > 0.5 / (kmax * kmax) * (1.0 + 1e-12)) {
        throw DomainError("dt exceeds the explicit stability guard 0.5 / k_max^2");
      }
    }
    (void)num_steps();
  }
};

namespace detail {

inline void axpy(StateSpectra& y, double a, const StateSpectra& x) {
  for (int k = 0; k < 5; ++k) {
    for (std::size_t i = 0; i < y[k].size(); ++i) y[k][i] += a * x[k][i];
  }
}

inline void check_finite(const StateSpectra& y) {
  for (const auto& v : y) {
    for (const Complex& c : v) {
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
        throw NonFiniteError("non-finite value in the state");
      }
    }
  }
}

inline int max_shell(const Grid& g) {
  int m = 0;
  for (std::size_t i = 0; i < g.spectral_size(); ++i) m = std::max(m, g.shell(i));
  return m;
}

}  // namespace detail

/// exp(tau L) for the primitive stiff part: solenoidal velocity decays with
/// mu k^2 / rho, compressive velocity with (lambda + 2 mu) k^2 / rho, theta with
/// kappa k^2 / (c_v rho).
class PrimitivePropagator {
 public:
  PrimitivePropagator(GridPtr grid, const Params& p, double dt) : grid_(std::move(grid)) {
    const int ms = detail::max_shell(*grid_);
    const double kf2 = grid_->k_fundamental() * grid_->k_fundamental();
    const double nu = p.mu / p.rho_bar;
    const double nu_c = (p.lambda + 2.0 * p.mu) / p.rho_bar;
    const double chi = p.kappa / (p.c_v * p.rho_bar);
    for (int h = 0; h < 2; ++h) {
      const double tau = h == 0 ? dt : 0.5 * dt;
      auto& f = factors_[h];
      f.sol.resize(ms + 1);
      f.comp.resize(ms + 1);
      f.heat.resize(ms + 1);
      for (int s = 0; s <= ms; ++s) {
        const double k2 = kf2 * s;
        f.sol[s] = std::exp(-nu * k2 * tau);
        f.comp[s] = std::exp(-nu_c * k2 * tau);
        f.heat[s] = std::exp(-chi * k2 * tau);
      }
    }
  }

  void apply(StateSpectra& y, bool half) const {
    const Grid& g = *grid_;
    const auto& f = factors_[half ? 1 : 0];
    for (std::size_t i = 1; i < g.spectral_size(); ++i) {
      const int s = g.shell(i);
      const double kx = g.kx(i), ky = g.ky(i), k2 = g.k_squared(i);
      const Complex kdu = (kx * y[1][i] + ky * y[2][i]) / k2;
      const Complex c1 = kx * kdu, c2 = ky * kdu;
      y[1][i] = f.sol[s] * (y[1][i] - c1) + f.comp[s] * c1;
      y[2][i] = f.sol[s] * (y[2][i] - c2) + f.comp[s] * c2;
      y[3][i] *= f.heat[s];
    }
  }

 private:
  struct Factors {
    std::vector<double> sol, comp, heat;
  };
  GridPtr grid_;
  Factors factors_[2];
};

/// exp(tau L) for the reformulated linear part, per |k| shell.
class ReformulatedPropagator {
 public:
  ReformulatedPropagator(GridPtr grid, double dt) : grid_(std::move(grid)) {
    const int ms = detail::max_shell(*grid_);
    std::vector<char> present(ms + 1, 0);
    for (std::size_t i = 0; i < grid_->spectral_size(); ++i) present[grid_->shell(i)] = 1;
    const double kf = grid_->k_fundamental();
    for (int h = 0; h < 2; ++h) {
      const double tau = h == 0 ? dt : 0.5 * dt;
      auto& f = factors_[h];
      f.block.assign(ms + 1, Eigen::Matrix3d::Identity());
      f.heat.assign(ms + 1, 1.0);
      for (int s = 1; s <= ms; ++s) {
        if (!present[s]) continue;
        const double r = kf * std::sqrt(static_cast<double>(s));
        f.block[s] = compressible_exponential(r, tau);
        f.heat[s] = std::exp(-r * r * tau);
      }
    }
  }

  void apply(StateSpectra& y, bool half) const {
    const Grid& g = *grid_;
    const auto& f = factors_[half ? 1 : 0];
    const Complex I{0.0, 1.0};
    for (std::size_t i = 1; i < g.spectral_size(); ++i) {
      const int s = g.shell(i);
      const double kx = g.kx(i), ky = g.ky(i), k2 = g.k_squared(i);
      const Complex kdu = kx * y[1][i] + ky * y[2][i];
      const Complex d = I * kdu;
      const Complex s1 = y[1][i] - kx * kdu / k2;
      const Complex s2 = y[2][i] - ky * kdu / k2;
      const Eigen::Matrix3d& E = f.block[s];
      const Complex p = y[0][i], t = y[3][i];
      const Complex pn = E(0, 0) * p + E(0, 1) * d + E(0, 2) * t;
      const Complex dn = E(1, 0) * p + E(1, 1) * d + E(1, 2) * t;
      const Complex tn = E(2, 0) * p + E(2, 1) * d + E(2, 2) * t;
      y[0][i] = pn;
      y[3][i] = tn;
      y[1][i] = f.heat[s] * s1 - I * kx * dn / k2;
      y[2][i] = f.heat[s] * s2 - I * ky * dn / k2;
    }
  }

 private:
  struct Factors {
    std::vector<Eigen::Matrix3d> block;
    std::vector<double> heat;
  };
  GridPtr grid_;
  Factors factors_[2];
};

namespace detail {

template <class Propagator, class Explicit>
StateSpectra if_midpoint_step(const Grid& g, const StateSpectra& y, double dt,
                              const Propagator& prop, Explicit&& nonlinear) {
  const StateSpectra n0 = nonlinear(y);
  StateSpectra ystar = y;
  axpy(ystar, 0.5 * dt, n0);
  prop.apply(ystar, true);
  StateSpectra n1 = nonlinear(ystar);
  prop.apply(n1, true);
  StateSpectra y1 = y;
  prop.apply(y1, false);
  axpy(y1, dt, n1);
  for (auto& v : y1) drop_nyquist_in_place(g, v);
  check_finite(y1);
  return y1;
}

}  // namespace detail

class PrimitiveStepper {
 public:
  PrimitiveStepper(GridPtr grid, const SolverConfig& cfg)
      : grid_(std::move(grid)), cfg_(cfg), prop_(grid_, cfg.params, cfg.dt) {}

  StateSpectra advance(const StateSpectra& y) const {
    const RhsOptions opt{cfg_.dealias, cfg_.linear_only, kVacuumGuard};
    return detail::if_midpoint_step(*grid_, y, cfg_.dt, prop_, [&](const StateSpectra& s) {
      return primitive_explicit_part(*grid_, s, cfg_.params, opt);
    });
  }

  MhdState step(const MhdState& s) const {
    return primitive_from_spectra(grid_, advance(spectra_of(s)), s.time + cfg_.dt);
  }

 private:
  GridPtr grid_;
  SolverConfig cfg_;
  PrimitivePropagator prop_;
};

class ReformulatedStepper {
 public:
  ReformulatedStepper(GridPtr grid, const SolverConfig& cfg)
      : grid_(std::move(grid)), cfg_(cfg), prop_(grid_, cfg.dt) {
    detail::require_normalized(cfg.params);
  }

  StateSpectra advance(const StateSpectra& y) const {
    const RhsOptions opt{cfg_.dealias, cfg_.linear_only, kVacuumGuard};
    return detail::if_midpoint_step(*grid_, y, cfg_.dt, prop_, [&](const StateSpectra& s) {
      return reformulated_explicit_part(*grid_, s, opt);
    });
  }

  ReformulatedState step(const ReformulatedState& s) const {
    return reformulated_from_spectra(grid_, advance(spectra_of(s)), s.time + cfg_.dt);
  }

 private:
  GridPtr grid_;
  SolverConfig cfg_;
  ReformulatedPropagator prop_;
};

/// One step of the primitive system.
inline MhdState step(const MhdState& s, double dt, SolverConfig cfg) {
  cfg.dt = dt;
  cfg.formulation = Formulation::Primitive;
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  return PrimitiveStepper(s.grid_ptr(), cfg).step(s);
}

/// One step of the reformulated system.
inline ReformulatedState step(const ReformulatedState& s, double dt, SolverConfig cfg) {
  cfg.dt = dt;
  cfg.formulation = Formulation::Reformulated;
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  return ReformulatedStepper(s.grid_ptr(), cfg).step(s);
}

struct Trajectory {
  Formulation formulation = Formulation::Primitive;
  double dt = 0.0;
  std::vector<MhdState> snapshots;
  std::vector<SpectralField> phi_snapshots;  // evolved phi (reformulated and dual runs)
  DiagnosticSeries diagnostics;
  Termination termination = Termination::Completed;
  std::string message;
  long long steps_taken = 0;
  double final_time = 0.0;
  double max_abs_a = 0.0;
  double min_density = 1.0;
  /// Dual runs: ||phi_evolved - phi(a, theta, b)||_{L^2} at diagnostic samples.
  std::vector<double> consistency_t, consistency_err;

  double max_consistency_error() const {
    double m = 0.0;
    for (double e : consistency_err) m = std::max(m, e);
    return m;
  }
};

namespace detail {

inline double sup_abs_physical(const Grid& g, std::span<const Complex> c) {
  const auto v = inverse(g, c);
  double m = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteError("non-finite density perturbation");
    m = std::max(m, std::abs(x));
  }
  return m;
}

inline double min_physical(const Grid& g, std::span<const Complex> c) {
  const auto v = inverse(g, c);
  return *std::min_element(v.begin(), v.end());
}

}  // namespace detail

/// Integrates from `initial` to t_end. Guard violations end the run early with
/// the reason recorded; everything computed up to that point is kept.
inline Trajectory simulate(const MhdState& initial, const SolverConfig& cfg) {
  const GridPtr& grid = initial.grid_ptr();
  const Grid& g = *grid;
  cfg.validate(g);
  const long long nsteps = cfg.num_steps();
  const double t0 = initial.time;

  Trajectory tr;
  tr.formulation = cfg.formulation;
  tr.dt = cfg.dt;
  tr.diagnostics.sigma = cfg.sigma;
  tr.diagnostics.gammas = cfg.gammas;

  const bool run_prim = cfg.formulation != Formulation::Reformulated;
  const bool run_ref = cfg.formulation != Formulation::Primitive;

  StateSpectra prim, ref;
  if (run_prim) {
    prim = spectra_of(initial);
    for (auto& v : prim) drop_nyquist_in_place(g, v);
  }
  if (run_ref) {
    ref = spectra_of(to_reformulated(initial));
    for (auto& v : ref) drop_nyquist_in_place(g, v);
  }
  {
    auto init = run_prim ? primitive_from_spectra(grid, prim, t0)
                         : to_primitive(reformulated_from_spectra(grid, ref, t0));
    tr.diagnostics.X0_ref = smallness_X0(init);
  }

  std::unique_ptr<PrimitiveStepper> ps;
  std::unique_ptr<ReformulatedStepper> rs;
  if (run_prim) ps = std::make_unique<PrimitiveStepper>(grid, cfg);
  if (run_ref) rs = std::make_unique<ReformulatedStepper>(grid, cfg);

  auto a_spectrum = [&]() -> Spectrum {
    if (run_prim) return prim[0];
    Spectrum a(ref[0].size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (ref[0][i] - ref[4][i]);
    return a;
  };

  auto observe = [&](long long k, bool force) {
    const double t = t0 + static_cast<double>(k) * cfg.dt;
    const auto a = a_spectrum();
    tr.max_abs_a = std::max(tr.max_abs_a, detail::sup_abs_physical(g, a));
    tr.min_density = std::min(tr.min_density, 1.0 + detail::min_physical(g, a));
    const bool diag = force || k % cfg.diagnostic_stride == 0;
    const bool snap = cfg.keep_snapshots && (force || k % cfg.snapshot_stride == 0);
    if (!diag && !snap) return;
    MhdState state = run_prim ? primitive_from_spectra(grid, prim, t)
                              : to_primitive(reformulated_from_spectra(grid, ref, t));
    SpectralField phi = run_ref ? SpectralField::from_coefficients(grid, ref[0])
                                : compute_phi(state.a, state.theta, state.b);
    if (diag) {
      if (cfg.record_diagnostics) tr.diagnostics.record(state, phi, cfg.params);
      if (run_prim && run_ref) {
        tr.consistency_t.push_back(t);
        tr.consistency_err.push_back((phi - compute_phi(state.a, state.theta, state.b)).l2_norm());
      }
    }
    if (snap) {
      if (run_ref) tr.phi_snapshots.push_back(phi);
      tr.snapshots.push_back(std::move(state));
    }
  };

  long long k = 0;
  try {
    observe(0, true);
    for (k = 1; k <= nsteps; ++k) {
      if (run_prim) prim = ps->advance(prim);
      if (run_ref) ref = rs->advance(ref);
      tr.steps_taken = k;
      observe(k, k == nsteps);
      if (cfg.enforce_smallness && tr.max_abs_a > cfg.smallness_bound) {
        tr.termination = Termination::SmallnessViolation;
        tr.message = "sup|a| exceeded " + std::to_string(cfg.smallness_bound);
        break;
      }
    }
  } catch (const VacuumError& e) {
    tr.termination = Termination::VacuumAbort;
    tr.message = e.what();
  } catch (const NonFiniteError& e) {
    tr.termination = Termination::NanAbort;
    tr.message = e.what();
  } catch (const DomainError& e) {
    // recover_b fails once the magnetic pressure turns nonpositive; treat like vacuum.
    tr.termination = Termination::VacuumAbort;
    tr.message = e.what();
  }
  tr.final_time = t0 + static_cast<double>(tr.steps_taken) * cfg.dt;
  return tr;
}

struct ConservationReport {
  double mass_a_drift = 0.0;         // max_t |int a(t) - int a(0)|
  double mass_b_drift = 0.0;
  double energy_relative_drift = 0.0;  // max_t |E(t) - E(0)| / |E(0)|
  double span = 0.0;                 // monitored time span
};

inline ConservationReport conservation_report(const Trajectory& tr) {
  if (tr.formulation == Formulation::Reformulated) {
    throw DomainError("conservation_report needs a primitive (or dual) trajectory");
  }
  const auto& d = tr.diagnostics;
  ConservationReport r;
  if (d.size() == 0) return r;
  for (std::size_t i = 0; i < d.size(); ++i) {
    r.mass_a_drift = std::max(r.mass_a_drift, std::abs(d.mass_a[i] - d.mass_a[0]));
    r.mass_b_drift = std::max(r.mass_b_drift, std::abs(d.mass_b[i] - d.mass_b[0]));
    r.energy_relative_drift =
        std::max(r.energy_relative_drift,
                 std::abs(d.total_energy[i] - d.total_energy[0]) / std::abs(d.total_energy[0]));
  }
  r.span = d.t.back() - d.t.front();
  return r;
}

inline LyapunovReport lyapunov_monitor(const Trajectory& tr, double t_after = 0.0,
                                       double tolerance = 1e-6) {
  return lyapunov_monitor(tr.diagnostics.t, tr.diagnostics.lyapunov, tr.diagnostics.sigma, t_after,
                          tolerance);
}

}  // namespace mhd25

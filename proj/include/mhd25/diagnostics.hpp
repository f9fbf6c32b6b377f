#pragma once

// Energy/dissipation functionals, low-frequency negative Besov norms, the
// frequency-localized Lyapunov functionals, and time-series bookkeeping.
//
// Tuples of fields are normed by summing the norms of the members; vector
// fields use the Euclidean norm of their components per block.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mhd25/decay_fit.hpp"
#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"
#include "mhd25/littlewood_paley.hpp"
#include "mhd25/mhd_state.hpp"

namespace mhd25 {

/// Per-level block norms of every unknown at one instant.
struct FieldBlocks {
  BlockNorms a, phi, u, theta, b;
};

inline FieldBlocks field_blocks(const MhdState& s, const SpectralField& phi) {
  const auto an = default_analysis(s.grid_ptr());
  return {an->block_norms(s.a), an->block_norms(phi), an->block_norms(s.u),
          an->block_norms(s.theta), an->block_norms(s.b)};
}

namespace detail {

inline double low(const BlockNorms& b, double s) {
  return besov_from_blocks(b, {s, 2, Summation::One, FrequencyRange::Low});
}
inline double high(const BlockNorms& b, double s) {
  return besov_from_blocks(b, {s, 2, Summation::One, FrequencyRange::High});
}

}  // namespace detail

inline double energy_E(const FieldBlocks& f) {
  using detail::high;
  using detail::low;
  return low(f.phi, 0) + low(f.u, 0) + low(f.theta, 0) + low(f.a, 0) + low(f.b, 0) +
         high(f.phi, 3) + high(f.theta, 3) + high(f.a, 3) + high(f.b, 3) + high(f.u, 2);
}

inline double dissipation_D(const FieldBlocks& f) {
  using detail::high;
  using detail::low;
  return low(f.phi, 2) + low(f.u, 2) + low(f.theta, 2) + high(f.phi, 3) + high(f.u, 4) +
         high(f.theta, 5);
}

/// The bracket whose decay is asserted by the Lyapunov-type inequality:
/// low B^0 of (phi, u, theta) + high B^3 of (phi, theta) + high B^2 of u.
inline double lyapunov_value(const FieldBlocks& f) {
  using detail::high;
  using detail::low;
  return low(f.phi, 0) + low(f.u, 0) + low(f.theta, 0) + high(f.phi, 3) + high(f.theta, 3) +
         high(f.u, 2);
}

inline double energy_E(const MhdState& s, const SpectralField& phi) {
  return energy_E(field_blocks(s, phi));
}
inline double energy_E(const MhdState& s) {
  return energy_E(s, compute_phi(s.a, s.theta, s.b));
}

inline double dissipation_D(const MhdState& s, const SpectralField& phi) {
  return dissipation_D(field_blocks(s, phi));
}
inline double dissipation_D(const MhdState& s) {
  return dissipation_D(s, compute_phi(s.a, s.theta, s.b));
}

/// Initial smallness: low B^0 of (a, u, theta, b) + high B^3 of (a, theta, b)
/// + high B^2 of u.
inline double smallness_X0(const MhdState& s) {
  using detail::high;
  using detail::low;
  const auto an = default_analysis(s.grid_ptr());
  const auto a = an->block_norms(s.a);
  const auto u = an->block_norms(s.u);
  const auto th = an->block_norms(s.theta);
  const auto b = an->block_norms(s.b);
  return low(a, 0) + low(u, 0) + low(th, 0) + low(b, 0) + high(a, 3) + high(th, 3) + high(b, 3) +
         high(u, 2);
}

/// sup over low levels of 2^{-j sigma} times the summed block norms of (a, phi, u, theta).
inline double negative_besov_Y(const FieldBlocks& f, double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw DomainError("negative_besov_Y: sigma must lie in (0, 1]");
  const LevelRange sel = levels_for(FrequencyRange::Low, f.a.levels);
  double y = 0.0;
  for (int j = sel.j_min; j <= sel.j_max; ++j) {
    const double sum = f.a.at(j) + f.phi.at(j) + f.u.at(j) + f.theta.at(j);
    y = std::max(y, std::exp2(-j * sigma) * sum);
  }
  return y;
}

inline double negative_besov_Y(const MhdState& s, const SpectralField& phi, double sigma) {
  return negative_besov_Y(field_blocks(s, phi), sigma);
}
inline double negative_besov_Y(const MhdState& s, double sigma) {
  return negative_besov_Y(s, compute_phi(s.a, s.theta, s.b), sigma);
}

/// X(t) over sampled block norms. The high-frequency L^1 term of phi uses
/// the B^3 regularity.
inline double functional_X(std::span<const double> times, std::span<const FieldBlocks> samples) {
  if (samples.size() < 2) throw DomainError("functional_X needs at least two samples");
  auto column = [&](BlockNorms FieldBlocks::*m) {
    std::vector<BlockNorms> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.*m);
    return out;
  };
  const auto a = column(&FieldBlocks::a), phi = column(&FieldBlocks::phi);
  const auto u = column(&FieldBlocks::u), th = column(&FieldBlocks::theta);
  const auto b = column(&FieldBlocks::b);
  auto cl = [&](const std::vector<BlockNorms>& f, Summation q, double s, FrequencyRange range) {
    return chemin_lerner_from_blocks(times, f, q, {s, 2, Summation::One, range});
  };
  const auto inf = Summation::Infinity, one = Summation::One;
  const auto L = FrequencyRange::Low, H = FrequencyRange::High;
  double x = 0.0;
  for (const auto* f : {&phi, &u, &th, &a, &b}) x += cl(*f, inf, 0, L);
  for (const auto* f : {&phi, &th, &a, &b}) x += cl(*f, inf, 3, H);
  x += cl(u, inf, 2, H);
  for (const auto* f : {&phi, &u, &th}) x += cl(*f, one, 2, L);
  x += cl(phi, one, 3, H);
  x += cl(u, one, 4, H);
  x += cl(th, one, 5, H);
  return x;
}

/// L^2 norm of Lambda^gamma (phi, u, theta) with the zero mode excluded.
inline double lambda_gamma_norm(const SpectralField& phi, const VectorField& u,
                                const SpectralField& theta, double gamma) {
  const Grid& g = phi.grid();
  double acc = 0.0;
  for (std::size_t i = 1; i < g.spectral_size(); ++i) {
    const double e = std::norm(phi.coefficients()[i]) + std::norm(u[0].coefficients()[i]) +
                     std::norm(u[1].coefficients()[i]) + std::norm(theta.coefficients()[i]);
    if (e == 0.0) continue;
    acc += g.mode_weight(i) * std::pow(g.k_squared(i), gamma) * e;
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Frequency-localized Lyapunov functionals

enum class LyapunovRegime { Low, High };

struct LocalizedLyapunov {
  double L2 = 0.0;        // the functional itself (a squared quantity)
  double L2_tilde = 0.0;  // its dissipation
};

struct BlockQuadratics {
  double phi2 = 0, u2 = 0, theta2 = 0;              // ||.||^2
  double grad_phi2 = 0, grad_u2 = 0, grad_theta2 = 0;
  double div_u2 = 0;
  double u_dot_grad_phi = 0;                          // int Delta_j u . grad Delta_j phi
  double grad_theta_dot_grad_phi = 0;
  double lap_u_dot_grad_phi = 0;
};

/// Quadratic block quantities, evaluated exactly in Fourier space (box means).
inline BlockQuadratics block_quadratics(const SpectralField& phi, const VectorField& u,
                                        const SpectralField& theta, int j) {
  phi.require_same_grid(u[0]);
  phi.require_same_grid(u[1]);
  phi.require_same_grid(theta);
  const auto an = default_analysis(phi.grid_ptr());
  const Grid& g = phi.grid();
  BlockQuadratics q;
  if (!an->levels().contains(j)) return q;
  const Complex I{0.0, 1.0};
  for (std::size_t i = 1; i < g.spectral_size(); ++i) {
    const double w = an->weight(i, j);
    if (w == 0.0) continue;
    const double mw = g.mode_weight(i) * w * w;
    const double kx = g.is_nyquist_x(i) ? 0.0 : g.kx(i);
    const double ky = g.is_nyquist_y(i) ? 0.0 : g.ky(i);
    const double k2 = g.k_squared(i);
    const Complex p = phi.coefficients()[i];
    const Complex u1 = u[0].coefficients()[i], u2 = u[1].coefficients()[i];
    const Complex t = theta.coefficients()[i];
    const Complex gp1 = I * kx * p, gp2 = I * ky * p;
    const Complex gt1 = I * kx * t, gt2 = I * ky * t;
    const Complex div = I * (kx * u1 + ky * u2);
    q.phi2 += mw * std::norm(p);
    q.u2 += mw * (std::norm(u1) + std::norm(u2));
    q.theta2 += mw * std::norm(t);
    q.grad_phi2 += mw * k2 * std::norm(p);
    q.grad_u2 += mw * k2 * (std::norm(u1) + std::norm(u2));
    q.grad_theta2 += mw * k2 * std::norm(t);
    q.div_u2 += mw * std::norm(div);
    q.u_dot_grad_phi += mw * (std::conj(u1) * gp1 + std::conj(u2) * gp2).real();
    q.grad_theta_dot_grad_phi += mw * (std::conj(gt1) * gp1 + std::conj(gt2) * gp2).real();
    q.lap_u_dot_grad_phi += mw * (std::conj(-k2 * u1) * gp1 + std::conj(-k2 * u2) * gp2).real();
  }
  return q;
}

inline LocalizedLyapunov localized_lyapunov(const SpectralField& phi, const VectorField& u,
                                            const SpectralField& theta, int j, double eta,
                                            LyapunovRegime regime) {
  if (!(eta > 0.0 && eta <= 0.2)) throw DomainError("localized_lyapunov: eta must lie in (0, 0.2]");
  const BlockQuadratics q = block_quadratics(phi, u, theta, j);
  LocalizedLyapunov out;
  const double base = 0.25 * q.phi2 + 0.5 * q.u2 + 0.5 * q.theta2;
  const double diss = q.grad_u2 + q.grad_theta2;
  if (regime == LyapunovRegime::Low) {
    out.L2 = base + eta * q.u_dot_grad_phi;
    out.L2_tilde = diss + eta * (q.grad_phi2 - 2.0 * q.div_u2 + q.grad_theta_dot_grad_phi -
                                 q.lap_u_dot_grad_phi);
  } else {
    out.L2 = base + 0.25 * eta * q.grad_phi2 + eta * q.u_dot_grad_phi;
    out.L2_tilde = diss + eta * (q.grad_phi2 - 2.0 * q.div_u2 + q.grad_theta_dot_grad_phi);
  }
  return out;
}

inline LocalizedLyapunov localized_lyapunov(const ReformulatedState& s, int j, double eta = 0.1,
                                            LyapunovRegime regime = LyapunovRegime::Low) {
  return localized_lyapunov(s.phi, s.u, s.theta, j, eta, regime);
}

/// ||Delta_j phi||^2 + ||Delta_j u||^2 + ||Delta_j theta||^2.
inline double block_energy(const SpectralField& phi, const VectorField& u,
                           const SpectralField& theta, int j) {
  const BlockQuadratics q = block_quadratics(phi, u, theta, j);
  return q.phi2 + q.u2 + q.theta2;
}

// ---------------------------------------------------------------------------
// Lyapunov monitor

struct LyapunovViolation {
  double t0 = 0.0, t1 = 0.0;
  double increase = 0.0;
};

struct LyapunovReport {
  double c_tilde = 0.0;       // largest c with dF/dt + c F^{1 + sigma/2} <= 0 on the monitored span
  double max_increase = 0.0;  // largest single-step increase after t_after
  std::vector<LyapunovViolation> violations;
  double tolerance = 0.0;
  double t_after = 0.0;
  bool non_increasing() const { return violations.empty(); }
};

/// Checks a sampled functional F for monotone decay after t_after and
/// estimates the constant of d/dt F + c F^{1 + sigma/2} <= 0. Derivatives use
/// centered differences inside and one-sided differences at the ends.
inline LyapunovReport lyapunov_monitor(std::span<const double> times, std::span<const double> values,
                                       double sigma = 1.0, double t_after = 0.0,
                                       double tolerance = 1e-6) {
  if (times.size() != values.size()) throw DimensionMismatch("lyapunov_monitor: length mismatch");
  LyapunovReport rep;
  rep.tolerance = tolerance;
  rep.t_after = t_after;
  const std::size_t n = times.size();
  if (n < 2) return rep;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (times[k] < t_after) continue;
    const double inc = values[k + 1] - values[k];
    rep.max_increase = std::max(rep.max_increase, inc);
    if (inc > tolerance) rep.violations.push_back({times[k], times[k + 1], inc});
  }
  double c = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (times[k] < t_after || !(values[k] > 0.0)) continue;
    double d;
    if (k == 0) d = (values[1] - values[0]) / (times[1] - times[0]);
    else if (k + 1 == n) d = (values[k] - values[k - 1]) / (times[k] - times[k - 1]);
    else d = (values[k + 1] - values[k - 1]) / (times[k + 1] - times[k - 1]);
    c = std::min(c, -d / std::pow(values[k], 1.0 + 0.5 * sigma));
    any = true;
  }
  rep.c_tilde = any ? std::max(0.0, c) : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Diagnostic time series

struct DiagnosticSeries {
  double sigma = 1.0;
  double X0_ref = 0.0;
  std::vector<double> gammas;
  std::vector<double> t, E, D, Y;
  std::vector<std::vector<double>> lam;  // lam[g][sample]
  std::vector<double> mass_a, mass_b, total_energy, lyapunov;

  std::size_t size() const { return t.size(); }

  static std::string gamma_label(double g) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "lam_gamma_norm[%g]", g);
    return buf;
  }

  std::vector<std::string> header() const {
    std::vector<std::string> h = {"t", "E", "D", "X0_ref", "Y_sigma"};
    for (double g : gammas) h.push_back(gamma_label(g));
    for (const char* c : {"mass_a", "mass_b", "total_energy", "lyapunov_value"}) h.emplace_back(c);
    return h;
  }

  /// Series by CSV column name.
  std::vector<double> column(const std::string& name) const {
    if (name == "t") return t;
    if (name == "E") return E;
    if (name == "D") return D;
    if (name == "X0_ref") return std::vector<double>(t.size(), X0_ref);
    if (name == "Y_sigma") return Y;
    if (name == "mass_a") return mass_a;
    if (name == "mass_b") return mass_b;
    if (name == "total_energy") return total_energy;
    if (name == "lyapunov_value") return lyapunov;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      if (name == gamma_label(gammas[k])) return lam[k];
    }
    throw FormatError("unknown diagnostics column '" + name + "'");
  }

  /// Appends one sample computed from the primitive state and phi.
  void record(const MhdState& s, const SpectralField& phi, const Params& p) {
    if (lam.size() != gammas.size()) lam.assign(gammas.size(), {});
    const FieldBlocks fb = field_blocks(s, phi);
    t.push_back(s.time);
    E.push_back(energy_E(fb));
    D.push_back(dissipation_D(fb));
    Y.push_back(negative_besov_Y(fb, sigma));
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      lam[k].push_back(lambda_gamma_norm(phi, s.u, s.theta, gammas[k]));
    }
    const double area = s.a.grid().area();
    mass_a.push_back(area * s.a.mean());
    mass_b.push_back(area * s.b.mean());
    total_energy.push_back(mhd25::total_energy(s, p));
    lyapunov.push_back(lyapunov_value(fb));
  }

  void write_csv(std::ostream& os) const {
    const auto h = header();
    for (std::size_t c = 0; c < h.size(); ++c) os << (c ? "," : "") << h[c];
    os << '\n';
    char buf[40];
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::vector<double> row = {t[i], E[i], D[i], X0_ref, Y[i]};
      for (std::size_t k = 0; k < gammas.size(); ++k) row.push_back(lam[k][i]);
      row.insert(row.end(), {mass_a[i], mass_b[i], total_energy[i], lyapunov[i]});
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", row[c]);
        os << (c ? "," : "") << buf;
      }
      os << '\n';
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write_csv(os);
  }

  static DiagnosticSeries read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("diagnostics CSV: empty input");
    std::vector<std::string> cols;
    {
      std::stringstream ss(line);
      std::string c;
      while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    const std::vector<std::string> lead = {"t", "E", "D", "X0_ref", "Y_sigma"};
    const std::vector<std::string> tail = {"mass_a", "mass_b", "total_energy", "lyapunov_value"};
    if (cols.size() < lead.size() + tail.size() ||
        !std::equal(lead.begin(), lead.end(), cols.begin()) ||
        !std::equal(tail.begin(), tail.end(), cols.end() - tail.size())) {
      throw FormatError("diagnostics CSV: unexpected header");
    }
    DiagnosticSeries d;
    const std::size_t ng = cols.size() - lead.size() - tail.size();
    for (std::size_t k = 0; k < ng; ++k) {
      const std::string& c = cols[lead.size() + k];
      const std::string pre = "lam_gamma_norm[";
      if (c.rfind(pre, 0) != 0 || c.back() != ']') {
        throw FormatError("diagnostics CSV: bad column '" + c + "'");
      }
      d.gammas.push_back(std::stod(c.substr(pre.size(), c.size() - pre.size() - 1)));
    }
    d.lam.assign(ng, {});
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<double> v;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          v.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw FormatError("diagnostics CSV: bad number '" + cell + "'");
        }
      }
      if (v.size() != cols.size()) throw FormatError("diagnostics CSV: ragged row");
      d.t.push_back(v[0]);
      d.E.push_back(v[1]);
      d.D.push_back(v[2]);
      d.X0_ref = v[3];
      d.Y.push_back(v[4]);
      for (std::size_t k = 0; k < ng; ++k) d.lam[k].push_back(v[5 + k]);
      d.mass_a.push_back(v[5 + ng]);
      d.mass_b.push_back(v[6 + ng]);
      d.total_energy.push_back(v[7 + ng]);
      d.lyapunov.push_back(v[8 + ng]);
    }
    return d;
  }

  static DiagnosticSeries read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return read_csv(is);
  }
};

}  // namespace mhd25

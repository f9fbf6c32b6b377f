#pragma once

// Fourier symbol of the linearized reformulated system
//
//   phi_t + 2 div u = 0,   u_t - Lap u + grad(phi + theta) = 0,
//   theta_t - Lap theta + div u = 0.
//
// At |xi| = r the solenoidal velocity decouples with eigenvalue -r^2 and the
// coordinates (phi, d = i xi.u, theta) evolve under
//
//   [[0, -2, 0], [r^2, -r^2, r^2], [0, -1, -r^2]].

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/Polynomials>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mhd25/decay_fit.hpp"
#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"
#include "mhd25/littlewood_paley.hpp"

namespace mhd25 {

struct SymbolMatrix {
  double r = 0.0;
  Eigen::Matrix3d compressible = Eigen::Matrix3d::Zero();
  double incompressible = 0.0;

  double trace() const { return compressible.trace(); }
  double determinant() const { return compressible.determinant(); }
};

inline SymbolMatrix build_symbol(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("build_symbol: r must be >= 0");
  const double r2 = r * r;
  SymbolMatrix m;
  m.r = r;
  m.compressible << 0.0, -2.0, 0.0,
                    r2, -r2, r2,
                    0.0, -1.0, -r2;
  m.incompressible = -r2;
  return m;
}

/// Coefficients (c2, c1, c0) of the monic characteristic cubic.
inline std::array<double, 3> characteristic_coefficients(double r) {
  const double r2 = r * r;
  return {2.0 * r2, r2 * r2 + 3.0 * r2, 2.0 * r2 * r2};
}

/// |p(lambda)| divided by the sum of the magnitudes of its terms.
inline double relative_residual(double r, Complex lambda) {
  const auto [c2, c1, c0] = characteristic_coefficients(r);
  const Complex p = ((lambda + c2) * lambda + c1) * lambda + c0;
  const double a = std::abs(lambda);
  const double scale = a * a * a + c2 * a * a + c1 * a + c0;
  return scale == 0.0 ? 0.0 : std::abs(p) / scale;
}

struct SymbolSpectrum {
  double r = 0.0;
  std::array<Complex, 3> eigenvalues{};  // sorted by real part, descending
  int damped_index = 0;                  // the real branch

  Complex damped_branch() const { return eigenvalues[damped_index]; }
  double abscissa() const { return eigenvalues[0].real(); }
  /// The two branches other than the damped one.
  std::array<Complex, 2> parabolic_branches() const {
    std::array<Complex, 2> out{};
    int k = 0;
    for (int i = 0; i < 3; ++i) {
      if (i != damped_index) out[k++] = eigenvalues[i];
    }
    return out;
  }
};

namespace detail {

inline constexpr double kRootTolerance = 1e-12;

inline Complex newton_polish(double r, Complex z) {
  const auto [c2, c1, c0] = characteristic_coefficients(r);
  for (int it = 0; it < 60; ++it) {
    const Complex p = ((z + c2) * z + c1) * z + c0;
    const Complex dp = (3.0 * z + 2.0 * c2) * z + c1;
    if (dp == Complex{}) break;
    const Complex step = p / dp;
    z -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

}  // namespace detail

/// Roots of the characteristic cubic: companion-matrix seeds, then Newton
/// polishing to a relative residual of at most 1e-12. The cubic has negative
/// discriminant for r > 0, so there is one real root and a conjugate pair.
inline SymbolSpectrum eigenvalues(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("eigenvalues: r must be >= 0");
  SymbolSpectrum s;
  s.r = r;
  if (r == 0.0) return s;

  const auto [c2, c1, c0] = characteristic_coefficients(r);
  Eigen::Vector4d poly(c0, c1, c2, 1.0);
  Eigen::PolynomialSolver<double, 3> solver(poly);
  const auto& seeds = solver.roots();

  int real_i = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(seeds[i].imag()) < std::abs(seeds[real_i].imag())) real_i = i;
  }
  int pair_i = -1;
  for (int i = 0; i < 3; ++i) {
    if (i != real_i && (pair_i < 0 || seeds[i].imag() > seeds[pair_i].imag())) pair_i = i;
  }
  const double real_root = detail::newton_polish(r, Complex{seeds[real_i].real(), 0.0}).real();
  Complex pair = detail::newton_polish(r, seeds[pair_i]);
  if (pair.imag() < 0.0) pair = std::conj(pair);

  const std::array<Complex, 3> roots = {Complex{real_root, 0.0}, pair, std::conj(pair)};
  for (const Complex& z : roots) {
    if (!(relative_residual(r, z) <= detail::kRootTolerance)) {
      throw ConvergenceError("eigenvalues: root polishing did not converge at r = " +
                             std::to_string(r));
    }
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (roots[a].real() != roots[b].real()) return roots[a].real() > roots[b].real();
    return roots[a].imag() > roots[b].imag();
  });
  for (int i = 0; i < 3; ++i) {
    s.eigenvalues[i] = roots[order[i]];
    if (order[i] == 0) s.damped_index = i;
  }
  return s;
}

inline double incompressible_eigenvalue(double r) {
  if (!(r >= 0.0)) throw DomainError("incompressible_eigenvalue: r must be >= 0");
  return -r * r;
}

// ---------------------------------------------------------------------------
// Exact exponentials

/// exp(t A(r)) for the compressible block. Diagonalization when the
/// eigenvalues are well separated and the eigenvector basis is well
/// conditioned; scaling-and-squaring Pade otherwise.
inline Eigen::Matrix3d compressible_exponential(double r, double t) {
  if (!(t >= 0.0)) throw DomainError("compressible_exponential: t must be >= 0");
  const SymbolMatrix m = build_symbol(r);
  if (t == 0.0) return Eigen::Matrix3d::Identity();
  if (r == 0.0) {
    // Nilpotent block: the series terminates.
    const Eigen::Matrix3d At = m.compressible * t;
    return Eigen::Matrix3d::Identity() + At + 0.5 * At * At;
  }
  const SymbolSpectrum spec = eigenvalues(r);
  const auto& ev = spec.eigenvalues;

  double scale = 1.0, sep = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    scale = std::max(scale, std::abs(ev[i]));
    for (int j = i + 1; j < 3; ++j) sep = std::min(sep, std::abs(ev[i] - ev[j]));
  }
  if (sep > 1e-6 * scale) {
    Eigen::Matrix3cd V;
    // Kernel of A - lambda: rows 1 and 3 give v = (2(r^2+l), -l(r^2+l), l);
    // r^2 + l never vanishes since p(-r^2) = -r^4.
    const double r2 = r * r;
    for (int k = 0; k < 3; ++k) {
      const Complex l = ev[k];
      Eigen::Vector3cd v(2.0 * (r2 + l), -l * (r2 + l), l);
      V.col(k) = v / v.norm();
    }
    Eigen::JacobiSVD<Eigen::Matrix3cd> svd(V);
    const auto sv = svd.singularValues();
    const double cond = sv(0) / sv(2);
    if (std::isfinite(cond) && cond < 1e8) {
      Eigen::Vector3cd expo;
      for (int k = 0; k < 3; ++k) expo(k) = std::exp(ev[k] * t);
      const Eigen::Matrix3cd E = V * expo.asDiagonal() * V.inverse();
      return E.real();
    }
  }
  const Eigen::Matrix3d At = m.compressible * t;
  return At.exp();
}

/// Fourier amplitudes of (phi, u, theta) at one wavevector.
struct ModeAmplitudes {
  Complex phi{};
  std::array<Complex, 2> u{};
  Complex theta{};
};

/// Exact evolution of one mode under the linear semigroup.
inline ModeAmplitudes semigroup_evolve(const ModeAmplitudes& m0, double k1, double k2, double t) {
  if (!(t >= 0.0)) throw DomainError("semigroup_evolve: t must be >= 0");
  const double r2 = k1 * k1 + k2 * k2;
  if (r2 == 0.0 || t == 0.0) return m0;
  const double r = std::sqrt(r2);
  const Complex I{0.0, 1.0};
  const Complex kdotu = k1 * m0.u[0] + k2 * m0.u[1];
  const Complex d = I * kdotu;
  // Solenoidal remainder u - k (k.u) / r^2.
  const Complex s1 = m0.u[0] - k1 * kdotu / r2;
  const Complex s2 = m0.u[1] - k2 * kdotu / r2;
  const Eigen::Matrix3d E = compressible_exponential(r, t);
  const Eigen::Vector3cd v = E.cast<Complex>() * Eigen::Vector3cd(m0.phi, d, m0.theta);
  const double heat = std::exp(-r2 * t);
  ModeAmplitudes out;
  out.phi = v(0);
  out.theta = v(2);
  // Compressive part -i k d / r^2 has divergence d.
  out.u[0] = heat * s1 - I * k1 * v(1) / r2;
  out.u[1] = heat * s2 - I * k2 * v(1) / r2;
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue sweeps

struct SweepRow {
  double r = 0.0;
  std::array<Complex, 3> eig{};
  double abscissa = 0.0;
};

inline std::vector<SweepRow> symbol_sweep(double r_min, double r_max, int points) {
  if (!(r_min > 0.0) || !(r_max >= r_min) || points < 1) {
    throw DomainError("symbol_sweep: need 0 < r_min <= r_max and points >= 1");
  }
  std::vector<SweepRow> rows;
  rows.reserve(points);
  const double lo = std::log(r_min), hi = std::log(r_max);
  for (int i = 0; i < points; ++i) {
    const double r = points == 1 ? r_min : std::exp(lo + (hi - lo) * i / (points - 1));
    const SymbolSpectrum s = eigenvalues(r);
    rows.push_back({r, s.eigenvalues, s.abscissa()});
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "r,re1,im1,re2,im2,re3,im3,abscissa\n";
  char buf[64];
  auto put = [&](double x, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf << sep;
  };
  for (const auto& row : rows) {
    put(row.r, ',');
    for (const auto& z : row.eig) {
      put(z.real(), ',');
      put(z.imag(), ',');
    }
    put(row.abscissa, '\n');
  }
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "r,re1,im1,re2,im2,re3,im3,abscissa") {
    throw FormatError("sweep CSV: unexpected header");
  }
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 8> v{};
    std::stringstream ss(line);
    std::string cell;
    for (int k = 0; k < 8; ++k) {
      if (!std::getline(ss, cell, ',')) throw FormatError("sweep CSV: short row");
      try {
        v[k] = std::stod(cell);
      } catch (const std::exception&) {
        throw FormatError("sweep CSV: bad number '" + cell + "'");
      }
    }
    rows.push_back({v[0], {Complex{v[1], v[2]}, Complex{v[3], v[4]}, Complex{v[5], v[6]}}, v[7]});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Linear decay envelopes

enum class EnvelopeBranch {
  Heat,  // scalar heat semigroup exp(-r^2 t)
  Full,  // (phi, u, theta) under the full symbol
};

struct DecayEnvelopeSpec {
  double sigma = 1.0;
  double gamma = 0.0;
  EnvelopeBranch branch = EnvelopeBranch::Full;
  /// Radial amplitude profile before normalization; empty means
  /// r^(sigma - 1) chi(r), which has flat 2^(-j sigma)-weighted block norms.
  std::function<double(double)> profile;
  FitWindow window{10.0, std::numeric_limits<double>::infinity(), 0.0};
};

struct DecayEnvelope {
  std::vector<double> times;
  std::vector<double> norms;
  DecayFit fit;
  double initial_low_norm = 0.0;  // low-frequency negative Besov norm before normalization
};

/// L^2 norms of Lambda^gamma of the linear evolution of data whose low-frequency
/// B^{-sigma}_{2,inf} norm is 1. Each lattice mode carries the same radial
/// amplitude A(r) in phi, theta and both velocity components (compressive and
/// solenoidal); the heat branch evolves one scalar with amplitude A(r).
inline DecayEnvelope decay_envelope(const GridPtr& grid, const DecayEnvelopeSpec& spec,
                                    std::span<const double> times, bool fit = true) {
  if (!(spec.sigma > 0.0 && spec.sigma <= 1.0)) {
    throw DomainError("decay_envelope: sigma must lie in (0, 1]");
  }
  if (!(spec.gamma > -spec.sigma && spec.gamma <= 0.0)) {
    throw DomainError("decay_envelope: gamma must lie in (-sigma, 0]");
  }
  for (double t : times) {
    if (!(t >= 0.0)) throw DomainError("decay_envelope: times must be >= 0");
  }
  const Grid& g = *grid;
  const auto family = DyadicCutoffFamily::build();
  std::function<double(double)> profile = spec.profile;
  if (!profile) {
    const double s = spec.sigma;
    profile = [s, family](double r) { return std::pow(r, s - 1.0) * family.chi(r); };
  }

  struct Shell {
    double r = 0.0;
    double multiplicity = 0.0;
  };
  std::map<int, Shell> shells;
  for (std::size_t i = 1; i < g.spectral_size(); ++i) {
    if (g.is_nyquist(i)) continue;
    auto& sh = shells[g.shell(i)];
    sh.r = g.k_norm(i);
    sh.multiplicity += g.mode_weight(i);
  }

  std::vector<Shell> active;
  std::vector<double> amp;
  for (const auto& [key, sh] : shells) {
    const double A = profile(sh.r);
    if (A != 0.0) {
      active.push_back(sh);
      amp.push_back(A);
    }
  }

  // Sum of the per-field block norms of the initial data, weighted by 2^{-j sigma}.
  const double field_factor = spec.branch == EnvelopeBranch::Heat ? 1.0 : 2.0 + std::sqrt(2.0);
  const LevelRange levels = resolvable_levels(g);
  double y0 = 0.0;
  for (int j = levels.j_min; j <= std::min(0, levels.j_max); ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double w = family.bump(active[k].r, j);
      sq += active[k].multiplicity * w * w * amp[k] * amp[k];
    }
    y0 = std::max(y0, std::exp2(-j * spec.sigma) * field_factor * std::sqrt(sq));
  }
  if (!(y0 > 0.0)) throw DomainError("decay_envelope: profile has no low-frequency content");

  DecayEnvelope out;
  out.initial_low_norm = y0;
  out.times.assign(times.begin(), times.end());
  out.norms.reserve(times.size());
  for (double t : times) {
    double acc = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double r = active[k].r;
      const double r2 = r * r;
      const double A = amp[k] / y0;
      double e2;
      if (spec.branch == EnvelopeBranch::Heat) {
        const double h = std::exp(-r2 * t);
        e2 = h * h * A * A;
      } else {
        const Eigen::Matrix3d E = compressible_exponential(r, t);
        // Initial (phi, d, theta) = (A, i r A, A); d carries a factor i.
        const Eigen::Vector3cd v0(A, Complex{0.0, r * A}, A);
        const Eigen::Vector3cd v = E.cast<Complex>() * v0;
        const double h = std::exp(-r2 * t);
        e2 = std::norm(v(0)) + std::norm(v(1)) / r2 + std::norm(v(2)) + h * h * A * A;
      }
      acc += active[k].multiplicity * std::pow(r2, spec.gamma) * e2;
    }
    out.norms.push_back(std::sqrt(acc));
  }
  if (fit) out.fit = fit_decay(out.times, out.norms, spec.window);
  return out;
}

}  // namespace mhd25

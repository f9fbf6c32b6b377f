#pragma once

// Perturbation unknowns of the 2.5D full compressible viscous non-resistive
// MHD system around the equilibrium (rho, u, vartheta, m) = (1, 0, 1, 1):
//
//   a_t + div((1 + a) u) = 0
//   u_t + u.grad u = [mu Lap u + (lambda + mu) grad div u] / (rho(1+a))
//                    - [R theta_bar grad((1+a)(1+theta))
//                       + b_bar^2/(2 rho_bar) grad (1+b)^2] / (1+a)
//   theta_t + u.grad theta + (R/c_v)(1+theta) div u
//          = kappa Lap theta / (c_v rho(1+a)) + Q / (c_v rho theta_bar (1+a))
//   b_t + div((1 + b) u) = 0
//
// with Q = 2 mu |D(u)|^2 + lambda (div u)^2. With the default parameters this
// is the normalized perturbation system. The reformulated unknowns are
// phi = a(theta+1) + (b+1)^2/2 - 1/2 and delta = phi - 2a.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"

namespace mhd25 {

/// Density positivity threshold used by the right-hand sides and solver.
inline constexpr double kVacuumGuard = 0.1;

struct Params {
  double mu = 1.0;
  double lambda = -1.0;
  double c_v = 1.0;
  double kappa = 1.0;
  double R = 1.0;
  double rho_bar = 1.0;
  double theta_bar = 1.0;
  double b_bar = 1.0;

  void validate() const {
    if (!(mu > 0.0)) throw DomainError("params: mu must be positive");
    if (!(lambda + 2.0 * mu > 0.0)) throw DomainError("params: lambda + 2 mu must be positive");
    if (!(c_v > 0.0) || !(kappa > 0.0) || !(R > 0.0)) {
      throw DomainError("params: c_v, kappa and R must be positive");
    }
    if (!(rho_bar > 0.0) || !(theta_bar > 0.0) || !(b_bar > 0.0)) {
      throw DomainError("params: background states must be positive");
    }
  }

  /// True for mu = c_v = R = kappa = 1, lambda = -1 and unit backgrounds.
  bool is_normalized() const {
    return mu == 1.0 && lambda == -1.0 && c_v == 1.0 && kappa == 1.0 && R == 1.0 &&
           rho_bar == 1.0 && theta_bar == 1.0 && b_bar == 1.0;
  }

  nlohmann::json to_json() const {
    return {{"mu", mu},           {"lambda", lambda},   {"c_v", c_v},
            {"kappa", kappa},     {"R", R},             {"rho_bar", rho_bar},
            {"theta_bar", theta_bar}, {"b_bar", b_bar}};
  }

  static Params from_json(const nlohmann::json& j) {
    Params p;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const double v = it.value().get<double>();
      if (k == "mu") p.mu = v;
      else if (k == "lambda") p.lambda = v;
      else if (k == "c_v") p.c_v = v;
      else if (k == "kappa") p.kappa = v;
      else if (k == "R") p.R = v;
      else if (k == "rho_bar") p.rho_bar = v;
      else if (k == "theta_bar") p.theta_bar = v;
      else if (k == "b_bar") p.b_bar = v;
      else throw FormatError("params: unknown key '" + k + "'");
    }
    p.validate();
    return p;
  }
};

/// Perturbation tuple (a, u, theta, b).
struct MhdState {
  SpectralField a;
  VectorField u;
  SpectralField theta;
  SpectralField b;
  double time = 0.0;

  static MhdState zeros(const GridPtr& grid) {
    return {SpectralField::zeros(grid),
            {SpectralField::zeros(grid), SpectralField::zeros(grid)},
            SpectralField::zeros(grid),
            SpectralField::zeros(grid),
            0.0};
  }

  const GridPtr& grid_ptr() const { return a.grid_ptr(); }
  double min_density() const { return 1.0 + a.min_value(); }
  double sup_abs_a() const { return a.max_abs(); }
  bool all_finite() const {
    return a.all_finite() && u[0].all_finite() && u[1].all_finite() && theta.all_finite() &&
           b.all_finite();
  }
};

/// Reformulated unknowns (phi, u, theta) plus the transported delta from
/// which a = (phi - delta)/2 is recovered.
struct ReformulatedState {
  SpectralField phi;
  VectorField u;
  SpectralField theta;
  SpectralField delta;
  double time = 0.0;

  const GridPtr& grid_ptr() const { return phi.grid_ptr(); }
};

namespace detail {

inline void require_vacuum_free(std::span<const double> a, double guard) {
  double lo = 1e300;
  for (double x : a) lo = std::min(lo, 1.0 + x);
  if (!(lo > guard)) {
    throw VacuumError("density 1 + a reached " + std::to_string(lo) + " (guard " +
                      std::to_string(guard) + ")");
  }
}

inline Spectrum derivative_spectrum(const Grid& g, std::span<const Complex> c, int axis) {
  Spectrum out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (axis == 0) out[i] = g.is_nyquist_x(i) ? Complex{} : Complex{0.0, g.kx(i)} * c[i];
    else out[i] = g.is_nyquist_y(i) ? Complex{} : Complex{0.0, g.ky(i)} * c[i];
  }
  return out;
}

inline Spectrum laplacian_spectrum(const Grid& g, std::span<const Complex> c) {
  Spectrum out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = -g.k_squared(i) * c[i];
  return out;
}

inline std::vector<double> physical_derivative(const Grid& g, std::span<const Complex> c, int axis) {
  return inverse(g, derivative_spectrum(g, c, axis));
}

/// i k . (v1, v2) in spectral space.
inline Spectrum divergence_spectrum(const Grid& g, std::span<const Complex> v1,
                                    std::span<const Complex> v2) {
  Spectrum out(v1.size());
  for (std::size_t i = 0; i < v1.size(); ++i) {
    const Complex d1 = g.is_nyquist_x(i) ? Complex{} : Complex{0.0, g.kx(i)} * v1[i];
    const Complex d2 = g.is_nyquist_y(i) ? Complex{} : Complex{0.0, g.ky(i)} * v2[i];
    out[i] = d1 + d2;
  }
  return out;
}

inline void finish_tendency(const Grid& g, Spectrum& s, bool dealiased) {
  if (dealiased) dealias_in_place(g, s);
  drop_nyquist_in_place(g, s);
}

/// Physical-space velocity gradient and the derived scalars.
struct VelocityKinematics {
  std::vector<double> d11, d12, d21, d22;  // d_ij = partial_j u_i
  std::vector<double> div;
  std::vector<double> deformation_sq;  // |D(u)|^2

  VelocityKinematics(const Grid& g, std::span<const Complex> u1, std::span<const Complex> u2)
      : d11(physical_derivative(g, u1, 0)),
        d12(physical_derivative(g, u1, 1)),
        d21(physical_derivative(g, u2, 0)),
        d22(physical_derivative(g, u2, 1)),
        div(d11.size()),
        deformation_sq(d11.size()) {
    for (std::size_t i = 0; i < div.size(); ++i) {
      div[i] = d11[i] + d22[i];
      const double shear = 0.5 * (d12[i] + d21[i]);
      deformation_sq[i] = d11[i] * d11[i] + d22[i] * d22[i] + 2.0 * shear * shear;
    }
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise algebra

/// I(a) = a / (1 + a), evaluated pointwise.
inline SpectralField rational_I(const SpectralField& a) {
  detail::require_vacuum_free(a.values(), 0.0);
  return pointwise(a, [](double x) { return x / (1.0 + x); });
}

/// phi = a(theta + 1) + (b + 1)^2 / 2 - 1/2, pointwise.
inline SpectralField compute_phi(const SpectralField& a, const SpectralField& theta,
                                 const SpectralField& b) {
  a.require_same_grid(theta);
  a.require_same_grid(b);
  std::vector<double> v(a.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double bb = b.values()[i] + 1.0;
    v[i] = a.values()[i] * (theta.values()[i] + 1.0) + 0.5 * bb * bb - 0.5;
  }
  return SpectralField::from_values(a.grid_ptr(), std::move(v));
}

/// The expanded initial-data form a + a theta + b^2/2 + b of phi.
inline SpectralField compute_phi0(const SpectralField& a, const SpectralField& theta,
                                  const SpectralField& b) {
  a.require_same_grid(theta);
  a.require_same_grid(b);
  std::vector<double> v(a.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double ai = a.values()[i];
    const double bi = b.values()[i];
    v[i] = ai + ai * theta.values()[i] + 0.5 * bi * bi + bi;
  }
  return SpectralField::from_values(a.grid_ptr(), std::move(v));
}

/// delta = phi - 2a.
inline SpectralField compute_delta(const SpectralField& phi, const SpectralField& a) {
  return phi - 2.0 * a;
}

/// a = (phi - delta) / 2.
inline SpectralField recover_a(const SpectralField& phi, const SpectralField& delta) {
  return 0.5 * (phi - delta);
}

/// b from phi = a(theta+1) + (b+1)^2/2 - 1/2, taking the branch b + 1 > 0.
inline SpectralField recover_b(const SpectralField& phi, const SpectralField& a,
                               const SpectralField& theta) {
  std::vector<double> v(phi.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double rad =
        2.0 * phi.values()[i] + 1.0 - 2.0 * a.values()[i] * (1.0 + theta.values()[i]);
    if (!(rad > 0.0)) throw DomainError("recover_b: magnetic pressure is not positive");
    v[i] = std::sqrt(rad) - 1.0;
  }
  return SpectralField::from_values(phi.grid_ptr(), std::move(v));
}

inline ReformulatedState to_reformulated(const MhdState& s) {
  auto phi = compute_phi(s.a, s.theta, s.b);
  auto delta = compute_delta(phi, s.a);
  return {std::move(phi), s.u, s.theta, std::move(delta), s.time};
}

inline MhdState to_primitive(const ReformulatedState& r) {
  auto a = recover_a(r.phi, r.delta);
  auto b = recover_b(r.phi, a, r.theta);
  return {std::move(a), r.u, r.theta, std::move(b), r.time};
}

/// Max difference between the 3D Lorentz force (curl B) x B for B = (0, 0, m)
/// and its planar reduction -grad(m^2)/2, both evaluated spectrally.
inline double lorentz_reduction_check(const SpectralField& m) {
  const GridPtr& g = m.grid_ptr();
  const auto zero = SpectralField::zeros(g);
  // B = (0, 0, m); nothing depends on x3.
  const std::array<const SpectralField*, 3> B = {&zero, &zero, &m};
  auto d = [&](const SpectralField& f, int axis) -> SpectralField {
    return axis == 2 ? SpectralField::zeros(g) : partial(f, axis);
  };
  const std::array<SpectralField, 3> J = {
      d(*B[2], 1) - d(*B[1], 2),
      d(*B[0], 2) - d(*B[2], 0),
      d(*B[1], 0) - d(*B[0], 1),
  };
  const auto m2 = product(m, m, false);
  const auto grad_m2 = gradient(m2);
  double residual = 0.0;
  const std::size_t npts = g->num_points();
  for (std::size_t i = 0; i < npts; ++i) {
    const double jx = J[0].values()[i], jy = J[1].values()[i], jz = J[2].values()[i];
    const double bx = B[0]->values()[i], by = B[1]->values()[i], bz = B[2]->values()[i];
    const double fx = jy * bz - jz * by;
    const double fy = jz * bx - jx * bz;
    const double fz = jx * by - jy * bx;
    residual = std::max(residual, std::abs(fx + 0.5 * grad_m2[0].values()[i]));
    residual = std::max(residual, std::abs(fy + 0.5 * grad_m2[1].values()[i]));
    residual = std::max(residual, std::abs(fz));
  }
  return residual;
}

// ---------------------------------------------------------------------------
// Primitive right-hand side

struct RhsOptions {
  bool dealias = true;
  bool linear_only = false;
  double vacuum_guard = kVacuumGuard;
};

/// Spectra of five scalar unknowns. Primitive order: (a, u1, u2, theta, b);
/// reformulated order: (phi, u1, u2, theta, delta).
using StateSpectra = std::array<Spectrum, 5>;

inline StateSpectra spectra_of(const MhdState& s) {
  auto cp = [](const SpectralField& f) {
    return Spectrum(f.coefficients().begin(), f.coefficients().end());
  };
  return {cp(s.a), cp(s.u[0]), cp(s.u[1]), cp(s.theta), cp(s.b)};
}

inline StateSpectra spectra_of(const ReformulatedState& s) {
  auto cp = [](const SpectralField& f) {
    return Spectrum(f.coefficients().begin(), f.coefficients().end());
  };
  return {cp(s.phi), cp(s.u[0]), cp(s.u[1]), cp(s.theta), cp(s.delta)};
}

inline MhdState primitive_from_spectra(const GridPtr& g, StateSpectra s, double time) {
  return {SpectralField::from_coefficients(g, std::move(s[0])),
          {SpectralField::from_coefficients(g, std::move(s[1])),
           SpectralField::from_coefficients(g, std::move(s[2]))},
          SpectralField::from_coefficients(g, std::move(s[3])),
          SpectralField::from_coefficients(g, std::move(s[4])),
          time};
}

inline ReformulatedState reformulated_from_spectra(const GridPtr& g, StateSpectra s, double time) {
  return {SpectralField::from_coefficients(g, std::move(s[0])),
          {SpectralField::from_coefficients(g, std::move(s[1])),
           SpectralField::from_coefficients(g, std::move(s[2]))},
          SpectralField::from_coefficients(g, std::move(s[3])),
          SpectralField::from_coefficients(g, std::move(s[4])),
          time};
}

/// Stiff linear part of the primitive system: viscosity on u and heat
/// conduction on theta, applied as Fourier multipliers.
inline StateSpectra primitive_stiff_part(const Grid& g, const StateSpectra& s, const Params& p) {
  StateSpectra out;
  for (auto& v : out) v.assign(g.spectral_size(), Complex{});
  const double nu = p.mu / p.rho_bar;
  const double nu_c = (p.lambda + p.mu) / p.rho_bar;
  const double chi = p.kappa / (p.c_v * p.rho_bar);
  for (std::size_t i = 0; i < g.spectral_size(); ++i) {
    const double kx = g.is_nyquist_x(i) ? 0.0 : g.kx(i);
    const double ky = g.is_nyquist_y(i) ? 0.0 : g.ky(i);
    const double k2 = g.k_squared(i);
    const Complex kdotu = kx * s[1][i] + ky * s[2][i];
    out[1][i] = -nu * k2 * s[1][i] - nu_c * kx * kdotu;
    out[2][i] = -nu * k2 * s[2][i] - nu_c * ky * kdotu;
    out[3][i] = -chi * k2 * s[3][i];
  }
  return out;
}

/// Everything in the primitive right-hand side except primitive_stiff_part.
inline StateSpectra primitive_explicit_part(const Grid& g, const StateSpectra& s, const Params& p,
                                            const RhsOptions& opt) {
  const std::size_t ns = g.spectral_size();
  StateSpectra out;
  const auto div_u = detail::divergence_spectrum(g, s[1], s[2]);

  if (opt.linear_only) {
    for (auto& v : out) v.assign(ns, Complex{});
    for (std::size_t i = 0; i < ns; ++i) {
      const Complex ikx = g.is_nyquist_x(i) ? Complex{} : Complex{0.0, g.kx(i)};
      const Complex iky = g.is_nyquist_y(i) ? Complex{} : Complex{0.0, g.ky(i)};
      const Complex pot = p.R * p.theta_bar * (s[0][i] + s[3][i]) +
                          (p.b_bar * p.b_bar / p.rho_bar) * s[4][i];
      out[0][i] = -div_u[i];
      out[1][i] = -ikx * pot;
      out[2][i] = -iky * pot;
      out[3][i] = -(p.R / p.c_v) * div_u[i];
      out[4][i] = -div_u[i];
    }
    for (auto& v : out) detail::finish_tendency(g, v, false);
    return out;
  }

  const std::size_t np = g.num_points();
  const auto a = detail::inverse(g, s[0]);
  const auto u1 = detail::inverse(g, s[1]);
  const auto u2 = detail::inverse(g, s[2]);
  const auto th = detail::inverse(g, s[3]);
  const auto b = detail::inverse(g, s[4]);
  detail::require_vacuum_free(a, opt.vacuum_guard);

  const detail::VelocityKinematics kin(g, s[1], s[2]);
  const auto dth1 = detail::physical_derivative(g, s[3], 0);
  const auto dth2 = detail::physical_derivative(g, s[3], 1);
  const auto lap_th = detail::inverse(g, detail::laplacian_spectrum(g, s[3]));
  // Viscous stress divergence mu Lap u + (lambda + mu) grad div u.
  Spectrum visc1(ns), visc2(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const double kx = g.is_nyquist_x(i) ? 0.0 : g.kx(i);
    const double ky = g.is_nyquist_y(i) ? 0.0 : g.ky(i);
    const double k2 = g.k_squared(i);
    const Complex kdotu = kx * s[1][i] + ky * s[2][i];
    visc1[i] = -p.mu * k2 * s[1][i] - (p.lambda + p.mu) * kx * kdotu;
    visc2[i] = -p.mu * k2 * s[2][i] - (p.lambda + p.mu) * ky * kdotu;
  }
  const auto v1 = detail::inverse(g, visc1);
  const auto v2 = detail::inverse(g, visc2);

  std::vector<double> au1(np), au2(np), bu1(np), bu2(np), pot(np);
  const double mag = p.b_bar * p.b_bar / (2.0 * p.rho_bar);
  for (std::size_t i = 0; i < np; ++i) {
    au1[i] = a[i] * u1[i];
    au2[i] = a[i] * u2[i];
    bu1[i] = b[i] * u1[i];
    bu2[i] = b[i] * u2[i];
    const double bb = 1.0 + b[i];
    pot[i] = p.R * p.theta_bar * (1.0 + a[i]) * (1.0 + th[i]) + mag * bb * bb;
  }
  const auto pot_hat = detail::forward(g, pot);
  const auto gp1 = detail::physical_derivative(g, pot_hat, 0);
  const auto gp2 = detail::physical_derivative(g, pot_hat, 1);

  const auto div_au = detail::divergence_spectrum(g, detail::forward(g, au1), detail::forward(g, au2));
  const auto div_bu = detail::divergence_spectrum(g, detail::forward(g, bu1), detail::forward(g, bu2));
  out[0].resize(ns);
  out[4].resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    out[0][i] = -div_u[i] - div_au[i];
    out[4][i] = -div_u[i] - div_bu[i];
  }

  std::vector<double> ut1(np), ut2(np), tht(np);
  const double heat = p.kappa / (p.c_v * p.rho_bar);
  const double work = 1.0 / (p.c_v * p.rho_bar * p.theta_bar);
  for (std::size_t i = 0; i < np; ++i) {
    const double inv = 1.0 / (1.0 + a[i]);
    const double I = a[i] * inv;
    const double div = kin.div[i];
    ut1[i] = -(u1[i] * kin.d11[i] + u2[i] * kin.d12[i]) - I * v1[i] / p.rho_bar - inv * gp1[i];
    ut2[i] = -(u1[i] * kin.d21[i] + u2[i] * kin.d22[i]) - I * v2[i] / p.rho_bar - inv * gp2[i];
    const double Q = 2.0 * p.mu * kin.deformation_sq[i] + p.lambda * div * div;
    tht[i] = -(u1[i] * dth1[i] + u2[i] * dth2[i]) - (p.R / p.c_v) * (1.0 + th[i]) * div -
             I * heat * lap_th[i] + inv * work * Q;
  }
  out[1] = detail::forward(g, ut1);
  out[2] = detail::forward(g, ut2);
  out[3] = detail::forward(g, tht);
  for (auto& v : out) detail::finish_tendency(g, v, opt.dealias);
  return out;
}

struct PrimitiveTendency {
  SpectralField a;
  VectorField u;
  SpectralField theta;
  SpectralField b;
};

/// Full tendency (a_t, u_t, theta_t, b_t) of the primitive system.
inline PrimitiveTendency rhs_primitive(const MhdState& state, const Params& params,
                                       const RhsOptions& opt = {}) {
  params.validate();
  const GridPtr& g = state.grid_ptr();
  const auto s = spectra_of(state);
  auto ex = primitive_explicit_part(*g, s, params, opt);
  const auto st = primitive_stiff_part(*g, s, params);
  for (int k = 0; k < 5; ++k) {
    for (std::size_t i = 0; i < ex[k].size(); ++i) ex[k][i] += st[k][i];
  }
  auto t = primitive_from_spectra(g, std::move(ex), state.time);
  return {std::move(t.a), std::move(t.u), std::move(t.theta), std::move(t.b)};
}

// ---------------------------------------------------------------------------
// Reformulated system

/// Nonlinear terms of the reformulated system (all five).
struct NonlinearTerms {
  SpectralField F1;
  VectorField F2;
  SpectralField F3;
  SpectralField F4;
  VectorField F5;
};

namespace detail {

struct NonlinearPhysical {
  std::vector<double> F1, F2x, F2y, F3, F4, F5x, F5y;
  std::vector<double> u1, u2, div;  // reused by the delta equation
};

// Physical-space F1..F5 from spectra of (phi, u1, u2, theta) and samples of a.
inline NonlinearPhysical nonlinear_physical(const Grid& g, std::span<const Complex> phi,
                                            std::span<const Complex> u1h,
                                            std::span<const Complex> u2h,
                                            std::span<const Complex> thh,
                                            std::span<const double> a, double guard) {
  require_vacuum_free(a, guard);
  const std::size_t np = g.num_points();
  NonlinearPhysical out;
  const auto ph = inverse(g, phi);
  out.u1 = inverse(g, u1h);
  out.u2 = inverse(g, u2h);
  const auto th = inverse(g, thh);
  const auto dph1 = physical_derivative(g, phi, 0);
  const auto dph2 = physical_derivative(g, phi, 1);
  const auto dth1 = physical_derivative(g, thh, 0);
  const auto dth2 = physical_derivative(g, thh, 1);
  const auto lap_th = inverse(g, laplacian_spectrum(g, thh));
  const auto lap_u1 = inverse(g, laplacian_spectrum(g, u1h));
  const auto lap_u2 = inverse(g, laplacian_spectrum(g, u2h));
  const VelocityKinematics kin(g, u1h, u2h);
  for (auto* v : {&out.F1, &out.F2x, &out.F2y, &out.F3, &out.F4, &out.F5x, &out.F5y}) v->resize(np);
  out.div = kin.div;
  for (std::size_t i = 0; i < np; ++i) {
    const double u1 = out.u1[i], u2 = out.u2[i];
    const double inv = 1.0 / (1.0 + a[i]);
    const double I = a[i] * inv;
    const double div = kin.div[i];
    const double Q = 2.0 * kin.deformation_sq[i] - div * div;
    const double adv_phi = u1 * dph1[i] + u2 * dph2[i];
    out.F4[i] = -2.0 * ph[i] * div - th[i] * div + I * lap_th[i] + I * Q;
    out.F1[i] = -adv_phi + out.F4[i];
    out.F5x[i] = I * dph1[i] + I * dth1[i] - I * lap_u1[i];
    out.F5y[i] = I * dph2[i] + I * dth2[i] - I * lap_u2[i];
    out.F2x[i] = -(u1 * kin.d11[i] + u2 * kin.d12[i]) + out.F5x[i];
    out.F2y[i] = -(u1 * kin.d21[i] + u2 * kin.d22[i]) + out.F5y[i];
    out.F3[i] = -(u1 * dth1[i] + u2 * dth2[i]) - th[i] * div - I * lap_th[i] + inv * Q;
  }
  return out;
}

inline void require_normalized(const Params& p) {
  p.validate();
  if (!p.is_normalized()) {
    throw DomainError("the reformulated system is defined for the normalized parameters only");
  }
}

}  // namespace detail

/// F1..F5 evaluated from (phi, u, theta) and the density perturbation a.
inline NonlinearTerms nonlinear_F(const SpectralField& phi, const VectorField& u,
                                  const SpectralField& theta, const SpectralField& a,
                                  bool dealiased = true, double vacuum_guard = kVacuumGuard) {
  phi.require_same_grid(u[0]);
  phi.require_same_grid(u[1]);
  phi.require_same_grid(theta);
  phi.require_same_grid(a);
  const GridPtr& gp = phi.grid_ptr();
  const Grid& g = *gp;
  const auto np = detail::nonlinear_physical(g, phi.coefficients(), u[0].coefficients(),
                                             u[1].coefficients(), theta.coefficients(), a.values(),
                                             vacuum_guard);
  auto wrap = [&](const std::vector<double>& v) {
    auto f = SpectralField::from_values(gp, v);
    return dealiased ? dealias(f) : f;
  };
  return {wrap(np.F1), {wrap(np.F2x), wrap(np.F2y)}, wrap(np.F3), wrap(np.F4),
          {wrap(np.F5x), wrap(np.F5y)}};
}

/// Linear part of the reformulated system: phi_t = -2 div u,
/// u_t = Lap u - grad(phi + theta), theta_t = Lap theta - div u.
inline StateSpectra reformulated_linear_part(const Grid& g, const StateSpectra& s) {
  const std::size_t ns = g.spectral_size();
  StateSpectra out;
  for (auto& v : out) v.assign(ns, Complex{});
  const auto div_u = detail::divergence_spectrum(g, s[1], s[2]);
  for (std::size_t i = 0; i < ns; ++i) {
    const Complex ikx = g.is_nyquist_x(i) ? Complex{} : Complex{0.0, g.kx(i)};
    const Complex iky = g.is_nyquist_y(i) ? Complex{} : Complex{0.0, g.ky(i)};
    const double k2 = g.k_squared(i);
    const Complex pot = s[0][i] + s[3][i];
    out[0][i] = -2.0 * div_u[i];
    out[1][i] = -k2 * s[1][i] - ikx * pot;
    out[2][i] = -k2 * s[2][i] - iky * pot;
    out[3][i] = -k2 * s[3][i] - div_u[i];
  }
  return out;
}

/// Nonlinear tendencies (F1, F2, F3) and the delta transport law
/// delta_t = -u.grad delta + 2 a div u + F4.
inline StateSpectra reformulated_explicit_part(const Grid& g, const StateSpectra& s,
                                               const RhsOptions& opt) {
  const std::size_t ns = g.spectral_size();
  StateSpectra out;
  if (opt.linear_only) {
    for (auto& v : out) v.assign(ns, Complex{});
    return out;
  }
  const auto ph = detail::inverse(g, s[0]);
  const auto de = detail::inverse(g, s[4]);
  std::vector<double> a(ph.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (ph[i] - de[i]);
  auto np = detail::nonlinear_physical(g, s[0], s[1], s[2], s[3], a, opt.vacuum_guard);
  const auto dd1 = detail::physical_derivative(g, s[4], 0);
  const auto dd2 = detail::physical_derivative(g, s[4], 1);
  std::vector<double> dt(ph.size());
  for (std::size_t i = 0; i < dt.size(); ++i) {
    dt[i] = -(np.u1[i] * dd1[i] + np.u2[i] * dd2[i]) + 2.0 * a[i] * np.div[i] + np.F4[i];
  }
  out[0] = detail::forward(g, np.F1);
  out[1] = detail::forward(g, np.F2x);
  out[2] = detail::forward(g, np.F2y);
  out[3] = detail::forward(g, np.F3);
  out[4] = detail::forward(g, dt);
  for (auto& v : out) detail::finish_tendency(g, v, opt.dealias);
  return out;
}

struct ReformulatedTendency {
  SpectralField phi;
  VectorField u;
  SpectralField theta;
};

/// (phi_t, u_t, theta_t) = linear part + (F1, F2, F3) for given F.
inline ReformulatedTendency rhs_reformulated(const ReformulatedState& state,
                                             const NonlinearTerms& F) {
  const GridPtr& g = state.grid_ptr();
  auto lin = reformulated_linear_part(*g, spectra_of(state));
  auto add = [&](Spectrum& s, const SpectralField& f) {
    f.require_same_grid(state.phi);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += f.coefficients()[i];
  };
  add(lin[0], F.F1);
  add(lin[1], F.F2[0]);
  add(lin[2], F.F2[1]);
  add(lin[3], F.F3);
  return {SpectralField::from_coefficients(g, std::move(lin[0])),
          {SpectralField::from_coefficients(g, std::move(lin[1])),
           SpectralField::from_coefficients(g, std::move(lin[2]))},
          SpectralField::from_coefficients(g, std::move(lin[3]))};
}

/// Tendency with F computed from the state itself (a recovered from delta).
inline ReformulatedTendency rhs_reformulated(const ReformulatedState& state, const Params& params,
                                             const RhsOptions& opt = {}) {
  detail::require_normalized(params);
  if (opt.linear_only) {
    const GridPtr& g = state.grid_ptr();
    const auto z = SpectralField::zeros(g);
    return rhs_reformulated(state, NonlinearTerms{z, {z, z}, z, z, {z, z}});
  }
  const auto a = recover_a(state.phi, state.delta);
  return rhs_reformulated(state,
                          nonlinear_F(state.phi, state.u, state.theta, a, opt.dealias, opt.vacuum_guard));
}

// ---------------------------------------------------------------------------
// Energy bookkeeping

/// Pointwise total energy density (1/2) rho|u|^2 + c_v rho vartheta + m^2/2
/// in perturbation variables.
inline double total_energy_density(double a, double u1, double u2, double th, double b,
                                   const Params& p) {
  return 0.5 * p.rho_bar * (1.0 + a) * (u1 * u1 + u2 * u2) +
         p.c_v * p.rho_bar * p.theta_bar * (1.0 + a) * (1.0 + th) +
         0.5 * p.b_bar * p.b_bar * (1.0 + b) * (1.0 + b);
}

/// Integral of the total energy density over the box.
inline double total_energy(const MhdState& s, const Params& p) {
  const std::size_t np = s.a.values().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    acc += total_energy_density(s.a.values()[i], s.u[0].values()[i], s.u[1].values()[i],
                                s.theta.values()[i], s.b.values()[i], p);
  }
  return acc / static_cast<double>(np) * s.a.grid().area();
}

/// d/dt of total_energy along a tendency, by the pointwise chain rule.
inline double total_energy_rate(const MhdState& s, const PrimitiveTendency& t, const Params& p) {
  const std::size_t np = s.a.values().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    const double a = s.a.values()[i], th = s.theta.values()[i], b = s.b.values()[i];
    const double u1 = s.u[0].values()[i], u2 = s.u[1].values()[i];
    const double at = t.a.values()[i], tht = t.theta.values()[i], bt = t.b.values()[i];
    const double u1t = t.u[0].values()[i], u2t = t.u[1].values()[i];
    acc += 0.5 * p.rho_bar * at * (u1 * u1 + u2 * u2) +
           p.rho_bar * (1.0 + a) * (u1 * u1t + u2 * u2t) +
           p.c_v * p.rho_bar * p.theta_bar * (at * (1.0 + th) + (1.0 + a) * tht) +
           p.b_bar * p.b_bar * (1.0 + b) * bt;
  }
  return acc / static_cast<double>(np) * s.a.grid().area();
}

// ---------------------------------------------------------------------------
// State snapshots: five field records (a, u1, u2, theta, b) plus a JSON
// sidecar {time, params}.

inline void write_state(const std::string& field_path, const std::string& sidecar_path,
                        const MhdState& s, const Params& p) {
  const std::array<const SpectralField*, 5> fields = {&s.a, &s.u[0], &s.u[1], &s.theta, &s.b};
  write_snapshot(field_path, fields);
  std::ofstream os(sidecar_path);
  if (!os) throw FormatError("cannot open " + sidecar_path + " for writing");
  nlohmann::json j = {{"time", s.time},
                      {"params", p.to_json()},
                      {"n", s.a.grid().n()},
                      {"box_length", s.a.grid().box_length()}};
  os << j.dump(2) << '\n';
}

struct LoadedState {
  MhdState state;
  Params params;
};

inline LoadedState read_state(const std::string& field_path, const std::string& sidecar_path) {
  std::ifstream is(sidecar_path);
  if (!is) throw FormatError("cannot open " + sidecar_path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("state sidecar: ") + e.what());
  }
  const int n = j.at("n").get<int>();
  const double L = j.at("box_length").get<double>();
  auto grid = make_grid(n, L);
  auto fields = read_snapshot(field_path, grid);
  if (fields.size() != 5) throw FormatError("state snapshot must hold exactly 5 fields");
  MhdState s{fields[0], {fields[1], fields[2]}, fields[3], fields[4], j.at("time").get<double>()};
  return {std::move(s), Params::from_json(j.at("params"))};
}

}  // namespace mhd25

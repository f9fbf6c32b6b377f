#pragma once

// Pointwise check that phi_t obtained from the primitive tendencies by the
// chain rule, (theta + 1) a_t + a theta_t + (b + 1) b_t, equals the first
// component of the reformulated right-hand side.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "mhd25/grid.hpp"
#include "mhd25/mhd_state.hpp"

namespace mhd25 {

/// Random state built from modes with |m1|, |m2| <= kmax_modes (lattice units),
/// with each field scaled so that sup|field| = amplitude.
inline MhdState random_low_mode_state(const GridPtr& g, std::uint64_t seed, double amplitude = 0.25,
                                      int kmax_modes = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const double kf = g->k_fundamental();
  auto field = [&] {
    struct Mode {
      double k1, k2, c, s;
    };
    std::vector<Mode> modes;
    for (int m1 = 0; m1 <= kmax_modes; ++m1) {
      for (int m2 = -kmax_modes; m2 <= kmax_modes; ++m2) {
        if (m1 == 0 && m2 <= 0) continue;
        if (m1 * m1 + m2 * m2 > kmax_modes * kmax_modes) continue;
        modes.push_back({kf * m1, kf * m2, N(rng), N(rng)});
      }
    }
    auto f = SpectralField::sample(g, [&](double x, double y) {
      double v = 0.0;
      for (const auto& m : modes) {
        const double ph = m.k1 * x + m.k2 * y;
        v += m.c * std::cos(ph) + m.s * std::sin(ph);
      }
      return v;
    });
    return (amplitude / f.max_abs()) * f;
  };
  MhdState s = MhdState::zeros(g);
  s.a = field();
  s.u[0] = field();
  s.u[1] = field();
  s.theta = field();
  s.b = field();
  return s;
}

/// max over grid points of |phi_t (chain rule) - phi_t (reformulated)|,
/// both evaluated without dealiasing.
inline double chain_rule_residual(const MhdState& s) {
  const Params p;  // normalized
  RhsOptions opt;
  opt.dealias = false;
  const auto prim = rhs_primitive(s, p, opt);
  const auto phi = compute_phi(s.a, s.theta, s.b);
  const ReformulatedState rs{phi, s.u, s.theta, compute_delta(phi, s.a), s.time};
  const auto F = nonlinear_F(phi, s.u, s.theta, s.a, false);
  const auto ref = rhs_reformulated(rs, F);
  double res = 0.0;
  for (std::size_t i = 0; i < s.a.values().size(); ++i) {
    const double chain = (s.theta.values()[i] + 1.0) * prim.a.values()[i] +
                         s.a.values()[i] * prim.theta.values()[i] +
                         (s.b.values()[i] + 1.0) * prim.b.values()[i];
    res = std::max(res, std::abs(chain - ref.phi.values()[i]));
  }
  return res;
}

}  // namespace mhd25

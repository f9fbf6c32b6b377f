#pragma once

#include <cstdint>
#include <random>

#include "mhd25/mhd25.hpp"

namespace mhd25::support {

/// Random band-limited zero-mean field with modes |m| <= kmax_modes.
inline SpectralField random_band_field(const GridPtr& g, std::uint64_t seed, int kmax_modes = 4,
                                       double amplitude = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const double kf = g->k_fundamental();
  struct Mode {
    double k1, k2, c, s;
  };
  std::vector<Mode> modes;
  for (int m1 = 0; m1 <= kmax_modes; ++m1) {
    for (int m2 = -kmax_modes; m2 <= kmax_modes; ++m2) {
      if (m1 == 0 && m2 <= 0) continue;
      modes.push_back({kf * m1, kf * m2, N(rng), N(rng)});
    }
  }
  auto f = SpectralField::sample(g, [&](double x, double y) {
    double v = 0.0;
    for (const auto& m : modes) v += m.c * std::cos(m.k1 * x + m.k2 * y) + m.s * std::sin(m.k1 * x + m.k2 * y);
    return v;
  });
  return (amplitude / f.max_abs()) * f;
}

inline double max_diff(const SpectralField& a, const SpectralField& b) { return (a - b).max_abs(); }

}  // namespace mhd25::support

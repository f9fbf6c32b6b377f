#pragma once

// Initial perturbations: equilibrium, a single Fourier mode, random spectra
// calibrated to a target smallness X0, or a stored state.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include <json.hpp>

#include "mhd25/diagnostics.hpp"
#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"
#include "mhd25/mhd_state.hpp"

namespace mhd25 {

enum class InitialKind { Equilibrium, SingleMode, RandomSpectrum, File };

inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::Equilibrium: return "equilibrium";
    case InitialKind::SingleMode: return "single_mode";
    case InitialKind::RandomSpectrum: return "random_spectrum";
    default: return "file";
  }
}

inline InitialKind initial_kind_from_string(const std::string& s) {
  if (s == "equilibrium") return InitialKind::Equilibrium;
  if (s == "single_mode") return InitialKind::SingleMode;
  if (s == "random_spectrum") return InitialKind::RandomSpectrum;
  if (s == "file") return InitialKind::File;
  throw FormatError("unknown initial-data kind '" + s + "'");
}

struct InitialDataSpec {
  InitialKind kind = InitialKind::Equilibrium;
  /// Per-field peak amplitude (single_mode) or unscaled spectrum factor.
  double amplitude = 0.0;
  /// Target X0; when set, the fields are rescaled so that X0 matches it.
  std::optional<double> epsilon;
  /// |coefficient| ~ |k|^slope; empty means sigma - 1.
  std::optional<double> spectral_slope;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  double band_min = 0.0;  // physical wavenumbers, inclusive
  double band_max = 1.0;
  int m1 = 1, m2 = 0;     // single-mode lattice wavevector
  std::string path;       // file: field snapshot
  std::string sidecar;    // file: JSON sidecar

  double slope() const { return spectral_slope.value_or(sigma - 1.0); }

  void validate() const {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw DomainError("amplitude must be >= 0");
    if (epsilon && !(*epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
    if (!(band_max > band_min) || band_min < 0.0) throw DomainError("band must satisfy 0 <= min < max");
    if (kind == InitialKind::File && (path.empty() || sidecar.empty())) {
      throw DomainError("file initial data needs both path and sidecar");
    }
    if (kind == InitialKind::SingleMode && m1 == 0 && m2 == 0) {
      throw DomainError("single_mode needs a nonzero wavevector");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"kind", to_string(kind)}, {"amplitude", amplitude}, {"seed", seed},
                        {"sigma", sigma},          {"band", {band_min, band_max}},
                        {"mode", {m1, m2}}};
    if (epsilon) j["epsilon"] = *epsilon;
    if (spectral_slope) j["spectral_slope"] = *spectral_slope;
    if (!path.empty()) j["path"] = path;
    if (!sidecar.empty()) j["sidecar"] = sidecar;
    return j;
  }

  static InitialDataSpec from_json(const nlohmann::json& j) {
    InitialDataSpec s;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "kind") s.kind = initial_kind_from_string(v.get<std::string>());
      else if (k == "amplitude") s.amplitude = v.get<double>();
      else if (k == "epsilon") s.epsilon = v.get<double>();
      else if (k == "spectral_slope") s.spectral_slope = v.get<double>();
      else if (k == "sigma") s.sigma = v.get<double>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else if (k == "band") {
        s.band_min = v.at(0).get<double>();
        s.band_max = v.at(1).get<double>();
      } else if (k == "mode") {
        s.m1 = v.at(0).get<int>();
        s.m2 = v.at(1).get<int>();
      } else if (k == "path") s.path = v.get<std::string>();
      else if (k == "sidecar") s.sidecar = v.get<std::string>();
      else throw FormatError("initial: unknown key '" + k + "'");
    }
    s.validate();
    return s;
  }
};

namespace detail {

inline SpectralField single_mode_field(const GridPtr& g, int m1, int m2, double amp, double phase) {
  const double k1 = g->k_fundamental() * m1, k2 = g->k_fundamental() * m2;
  return SpectralField::sample(g, [&](double x, double y) {
    return amp * std::cos(k1 * x + k2 * y + phase);
  });
}

inline SpectralField random_band_field(const GridPtr& g, std::mt19937_64& rng, double slope,
                                       double kmin, double kmax) {
  std::normal_distribution<double> N(0.0, 1.0);
  Spectrum c(g->spectral_size());
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double re = N(rng), im = N(rng);
    const double k = g->k_norm(i);
    if (g->is_nyquist(i) || k < kmin || k > kmax) continue;
    // Column 0 stores both m2 and -m2; keep only m2 > 0 there and mirror.
    if (g->column_of(i) == 0 && g->signed_row(g->row_of(i)) < 0) continue;
    c[i] = std::pow(k, slope) * Complex{re, im} / std::sqrt(2.0);
  }
  const int n = g->n();
  for (int row = 1; row < n / 2; ++row) {
    const std::size_t pos = g->spectral_index(row, 0);
    const std::size_t neg = g->spectral_index(n - row, 0);
    c[neg] = std::conj(c[pos]);
  }
  return SpectralField::from_coefficients(g, std::move(c));
}

}  // namespace detail

/// Builds the initial perturbation. With epsilon set, the fields are scaled
/// by epsilon / X0 (X0 is absolutely homogeneous of degree one) and the
/// result is checked to reproduce epsilon within 1 %.
inline MhdState generate_initial(const InitialDataSpec& spec, const GridPtr& grid) {
  spec.validate();
  MhdState s = MhdState::zeros(grid);
  switch (spec.kind) {
    case InitialKind::Equilibrium:
      return s;
    case InitialKind::File: {
      auto loaded = read_state(spec.path, spec.sidecar);
      if (!loaded.state.a.grid().same_as(*grid)) {
        throw DimensionMismatch("stored initial state lives on a different grid");
      }
      MhdState out = std::move(loaded.state);
      out.time = 0.0;
      // Rebind to the caller's grid object.
      auto rebind = [&](const SpectralField& f) {
        return SpectralField::from_values(grid, std::vector<double>(f.values().begin(), f.values().end()));
      };
      return {rebind(out.a), {rebind(out.u[0]), rebind(out.u[1])}, rebind(out.theta), rebind(out.b), 0.0};
    }
    case InitialKind::SingleMode: {
      std::mt19937_64 rng(spec.seed);
      std::uniform_real_distribution<double> U(0.0, 2.0 * std::numbers::pi);
      const int h = grid->n() / 2;
      if (std::abs(spec.m1) >= h || std::abs(spec.m2) >= h) {
        throw DomainError("single_mode wavevector is not resolved below the Nyquist frequency");
      }
      double amp = spec.epsilon ? 1.0 : spec.amplitude;
      if (amp == 0.0 || (spec.epsilon && *spec.epsilon == 0.0)) return s;
      s.a = detail::single_mode_field(grid, spec.m1, spec.m2, amp, U(rng));
      s.u[0] = detail::single_mode_field(grid, spec.m1, spec.m2, amp, U(rng));
      s.u[1] = detail::single_mode_field(grid, spec.m1, spec.m2, amp, U(rng));
      s.theta = detail::single_mode_field(grid, spec.m1, spec.m2, amp, U(rng));
      s.b = detail::single_mode_field(grid, spec.m1, spec.m2, amp, U(rng));
      break;
    }
    case InitialKind::RandomSpectrum: {
      std::mt19937_64 rng(spec.seed);
      const double amp = spec.epsilon ? 1.0 : spec.amplitude;
      if (amp == 0.0 || (spec.epsilon && *spec.epsilon == 0.0)) return s;
      auto make = [&] {
        return amp * detail::random_band_field(grid, rng, spec.slope(), spec.band_min, spec.band_max);
      };
      s.a = make();
      s.u[0] = make();
      s.u[1] = make();
      s.theta = make();
      s.b = make();
      break;
    }
  }
  if (spec.epsilon) {
    const double x0 = smallness_X0(s);
    if (!(x0 > 0.0)) throw DomainError("target epsilon unreachable: generated data has X0 = 0");
    const double k = *spec.epsilon / x0;
    s.a *= k;
    s.u[0] *= k;
    s.u[1] *= k;
    s.theta *= k;
    s.b *= k;
    const double got = smallness_X0(s);
    if (std::abs(got - *spec.epsilon) > 0.01 * *spec.epsilon) {
      throw DomainError("target epsilon unreachable: calibrated X0 = " + std::to_string(got));
    }
  }
  if (!(s.min_density() > kVacuumGuard)) {
    throw DomainError("initial density perturbation reaches the vacuum guard");
  }
  return s;
}

}  // namespace mhd25

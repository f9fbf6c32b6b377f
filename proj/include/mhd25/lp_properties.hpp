#pragma once

// Randomized property suite for the dyadic decomposition: partition of
// unity, almost orthogonality, Bernstein, reconstruction, embeddings, and
// stability of empirical interpolation/product/commutator/composition
// constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhd25/grid.hpp"
#include "mhd25/littlewood_paley.hpp"
#include "mhd25/mhd_state.hpp"

namespace mhd25 {

struct PropertyResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;  // worst observed value of the checked quantity
  double bound = 0.0;     // threshold it is compared against
  std::string detail;

  nlohmann::json to_json() const {
    return {{"name", name}, {"passed", passed}, {"measured", measured}, {"bound", bound},
            {"detail", detail}};
  }
};

struct LpSuiteConfig {
  int seeds = 100;
  int n = 64;
  double box_length = 16.0 * std::numbers::pi;
  std::uint64_t base_seed = 20240601;
  /// Empirical constants are stable when max <= stability_factor * median.
  double stability_factor = 4.0;
};

/// Random smooth field: complex Gaussian coefficients with an |k|^-1 e^{-|k|/2}
/// envelope, zero mean and no Nyquist content.
inline SpectralField random_smooth_field(const GridPtr& g, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Spectrum c(g->spectral_size());
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double re = N(rng), im = N(rng);
    if (g->is_nyquist(i)) continue;
    const double k = g->k_norm(i);
    c[i] = scale * Complex{re, im} * std::exp(-0.5 * k) / k;
  }
  // Self-conjugate column-0 and column-n/2 entries must satisfy the symmetry.
  auto f = SpectralField::from_coefficients(g, std::move(c));
  return transform(f.grid_ptr(), std::vector<double>(f.values().begin(), f.values().end()));
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline PropertyResult stability(const std::string& name, const std::vector<double>& ratios,
                                double factor) {
  PropertyResult r;
  r.name = name;
  bool finite = !ratios.empty();
  for (double x : ratios) finite = finite && std::isfinite(x) && x > 0.0;
  const double mx = finite ? *std::max_element(ratios.begin(), ratios.end()) : NAN;
  const double med = finite ? median(ratios) : NAN;
  r.measured = finite ? mx / med : INFINITY;
  r.bound = factor;
  r.passed = finite && r.measured <= factor;
  char buf[160];
  std::snprintf(buf, sizeof buf, "max %.4g, median %.4g over %zu seeds", mx, med, ratios.size());
  r.detail = buf;
  return r;
}

inline double besov_l2_sum(const BlockNorms& b, double s) {
  double acc = 0.0;
  for (int j = b.levels.j_min; j <= b.levels.j_max; ++j) {
    const double t = std::exp2(j * s) * b.at(j);
    acc += t * t;
  }
  return std::sqrt(acc);
}

}  // namespace detail

inline std::vector<PropertyResult> run_lp_suite(const LpSuiteConfig& cfg = {}) {
  std::vector<PropertyResult> out;
  const auto family = DyadicCutoffFamily::build();
  const GridPtr g = make_grid(cfg.n, cfg.box_length);
  const auto an = default_analysis(g);
  const LevelRange lv = an->levels();

  {
    PropertyResult r{"partition_of_unity", false, family.partition_defect(1e-4, 1e4, 20001), 1e-10, ""};
    r.passed = r.measured <= r.bound;
    r.detail = "max |sum_j psi(2^-j r) - 1| on r in [1e-4, 1e4]";
    out.push_back(r);
  }

  double orth_lo = INFINITY, orth_hi = 0.0;
  double bern_upper = 0.0, bern_lower = INFINITY;
  double recon = 0.0;
  bool embed_ok = true;
  double embed_worst = 0.0;
  std::vector<double> interp, prod, comm, comp;
  double interp_excess = 0.0;  // max of ratio / provable constant

  const double s1 = 0.0, s2 = 2.0, theta = 0.5, s = (1.0 - theta) * s1 + theta * s2;
  const double interp_C = 1.0 / (1.0 - std::exp2(-(s - s1))) + 1.0 / (1.0 - std::exp2(-(s2 - s)));

  for (int k = 0; k < cfg.seeds; ++k) {
    const std::uint64_t seed = cfg.base_seed + 7919ULL * static_cast<std::uint64_t>(k);
    const auto f = random_smooth_field(g, seed);
    const auto h = random_smooth_field(g, seed + 1);
    const double f2 = f.energy();

    // Almost orthogonality and reconstruction.
    double blocks2 = 0.0;
    Spectrum sum(g->spectral_size());
    for (int j = lv.j_min; j <= lv.j_max; ++j) {
      const auto bj = an->block(f, j).field;
      blocks2 += bj.energy();
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += bj.coefficients()[i];

      const double bn = bj.l2_norm();
      if (bn > 1e-14 * std::sqrt(f2)) {
        const auto gr = gradient(bj);
        const double gn = std::sqrt(gr[0].energy() + gr[1].energy());
        bern_upper = std::max(bern_upper, gn / (std::exp2(j) * bn));
        bern_lower = std::min(bern_lower, gn / (std::exp2(j) * bn));
      }
    }
    const double ratio = blocks2 / f2;
    orth_lo = std::min(orth_lo, ratio);
    orth_hi = std::max(orth_hi, ratio);
    const auto rec = SpectralField::from_coefficients(g, std::move(sum));
    recon = std::max(recon, (rec - f).max_abs() / f.max_abs());

    // Embeddings: B^s_{2,1} >= B^s_{2,2} >= B^s_{2,inf}; low frequencies
    // lose weight as s grows, high frequencies gain.
    const BlockNorms b = an->block_norms(f);
    for (double sv : {-1.0, 0.0, 1.0, 2.0}) {
      const double n1 = besov_from_blocks(b, {sv, 2, Summation::One, FrequencyRange::All});
      const double n2 = detail::besov_l2_sum(b, sv);
      const double ni = besov_from_blocks(b, {sv, 2, Summation::Infinity, FrequencyRange::All});
      embed_ok = embed_ok && n1 >= n2 * (1 - 1e-14) && n2 >= ni * (1 - 1e-14);
      embed_worst = std::max({embed_worst, n2 / n1, ni / n2});
    }
    for (double sa : {-1.0, 0.0, 1.0}) {
      const double lo_a = besov_from_blocks(b, {sa, 2, Summation::One, FrequencyRange::Low});
      const double lo_b = besov_from_blocks(b, {sa + 1, 2, Summation::One, FrequencyRange::Low});
      const double hi_a = besov_from_blocks(b, {sa, 2, Summation::One, FrequencyRange::High});
      const double hi_b = besov_from_blocks(b, {sa + 1, 2, Summation::One, FrequencyRange::High});
      // Levels j <= 0 (low) vs j >= -1 (high): the weights 2^{j} at j = -1 enter the
      // high range, so the high-range comparison carries a factor 2.
      embed_ok = embed_ok && lo_b <= lo_a * (1 + 1e-14) && hi_a <= 2.0 * hi_b * (1 + 1e-14);
    }

    // Interpolation with the provable constant.
    const double nb = besov_from_blocks(b, {s, 2, Summation::One, FrequencyRange::All});
    const double na = besov_from_blocks(b, {s1, 2, Summation::Infinity, FrequencyRange::All});
    const double nc = besov_from_blocks(b, {s2, 2, Summation::Infinity, FrequencyRange::All});
    const double ir = nb / (std::pow(na, 1.0 - theta) * std::pow(nc, theta));
    interp.push_back(ir);
    interp_excess = std::max(interp_excess, ir / interp_C);

    // Product law in B^1_{2,1}.
    const BesovParams p1{1.0, 2, Summation::One, FrequencyRange::All};
    const double pr = an->besov_norm(product(f, h, false), p1) /
                      (f.max_abs() * an->besov_norm(h, p1) + h.max_abs() * an->besov_norm(f, p1));
    prod.push_back(pr);

    // Commutator: sum_j 2^{j s} ||[Delta_j, w.grad] f|| vs ||grad w||_inf ||f||_{B^s}.
    const VectorField w = {h, random_smooth_field(g, seed + 2)};
    double csum = 0.0;
    for (int j = lv.j_min; j <= lv.j_max; ++j) {
      csum += std::exp2(j * 1.0) * block_commutator(w, f, j).l2_norm();
    }
    double grad_w = 0.0;
    for (int c = 0; c < 2; ++c) {
      for (int ax = 0; ax < 2; ++ax) grad_w = std::max(grad_w, partial(w[c], ax).max_abs());
    }
    comm.push_back(csum / (grad_w * an->besov_norm(f, p1)));

    // Composition with I(z) = z/(1+z), scaled so sup|z| = 1/2.
    const auto z = (0.5 / f.max_abs()) * f;
    const double cr = an->besov_norm(pointwise(z, [](double x) { return x / (1.0 + x); }), p1) /
                      an->besov_norm(z, p1);
    comp.push_back(cr);
  }

  {
    PropertyResult r{"almost_orthogonality", false, 0.0, 0.0, ""};
    r.passed = orth_lo >= 0.5 - 1e-12 && orth_hi <= 1.0 + 1e-12;
    r.measured = orth_lo;
    r.bound = 0.5;
    char buf[128];
    std::snprintf(buf, sizeof buf, "sum_j ||D_j f||^2 / ||f||^2 in [%.6f, %.6f], required [0.5, 1]",
                  orth_lo, orth_hi);
    r.detail = buf;
    out.push_back(r);
  }
  {
    PropertyResult r{"bernstein", false, bern_upper, 8.0 / 3.0, ""};
    r.passed = bern_upper <= 8.0 / 3.0 + 1e-12 && bern_lower >= 0.75 - 1e-12;
    char buf[128];
    std::snprintf(buf, sizeof buf, "||grad D_j f|| / (2^j ||D_j f||) in [%.6f, %.6f], required [3/4, 8/3]",
                  bern_lower, bern_upper);
    r.detail = buf;
    out.push_back(r);
  }
  {
    PropertyResult r{"reconstruction", recon <= 1e-10, recon, 1e-10,
                     "max |sum_j D_j f - f| / max |f| (zero-mean fields)"};
    out.push_back(r);
  }
  {
    PropertyResult r{"embedding_monotonicity", embed_ok, embed_worst, 1.0,
                     "B_{2,1} >= B_{2,2} >= B_{2,inf}; low/high regularity ordering"};
    out.push_back(r);
  }
  {
    auto r = detail::stability("interpolation_constant", interp, cfg.stability_factor);
    r.passed = r.passed && interp_excess <= 1.0;
    r.detail += "; max ratio / provable constant " + std::to_string(interp_excess);
    out.push_back(r);
  }
  out.push_back(detail::stability("product_constant", prod, cfg.stability_factor));
  out.push_back(detail::stability("commutator_constant", comm, cfg.stability_factor));
  out.push_back(detail::stability("composition_constant", comp, cfg.stability_factor));
  return out;
}

}  // namespace mhd25

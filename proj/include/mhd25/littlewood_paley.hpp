#pragma once

// Homogeneous Littlewood-Paley analysis on the periodic grid: a smooth radial
// cutoff chi, the dyadic bump psi(xi) = chi(xi/2) - chi(xi), blocks
// Delta_j f = psi(2^-j D) f, Besov and Chemin-Lerner norms, and the
// frequency split used by the energy functionals.
//
// The zero mode never enters a block.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mhd25/error.hpp"
#include "mhd25/grid.hpp"

namespace mhd25 {

/// Radial cutoff chi (== 1 on |xi| <= 3/4, == 0 on |xi| >= 4/3) and the
/// derived dyadic bump. The transition is the exp(-s/x) mollifier step with
/// sharpness s.
class DyadicCutoffFamily {
 public:
  static constexpr double kInnerRadius = 0.75;
  static constexpr double kOuterRadius = 4.0 / 3.0;
  static constexpr double kBumpInner = 0.75;
  static constexpr double kBumpOuter = 8.0 / 3.0;
  static constexpr double kMinSharpness = 0.1;
  static constexpr double kMaxSharpness = 10.0;

  /// Validates the sharpness and checks the partition of unity on a
  /// logarithmic radius sweep.
  static DyadicCutoffFamily build(double sharpness = 1.0) {
    if (!(sharpness >= kMinSharpness && sharpness <= kMaxSharpness)) {
      throw DomainError("cutoff sharpness must lie in [0.1, 10]");
    }
    DyadicCutoffFamily fam(sharpness);
    if (fam.partition_defect(1e-4, 1e4, 4001) > 1e-10) {
      throw DomainError("cutoff profile fails the partition-of-unity tolerance");
    }
    return fam;
  }

  double sharpness() const { return sharpness_; }

  double chi(double r) const {
    r = std::abs(r);
    if (r <= kInnerRadius) return 1.0;
    if (r >= kOuterRadius) return 0.0;
    const double x = (kOuterRadius - r) / (kOuterRadius - kInnerRadius);
    const double fx = mollifier(x);
    const double fy = mollifier(1.0 - x);
    return fx / (fx + fy);
  }

  double psi(double r) const { return chi(0.5 * r) - chi(r); }

  /// psi(2^-j r).
  double bump(double r, int j) const { return psi(std::ldexp(r, -j)); }

  /// Largest |sum_j psi(2^-j r) - 1| over `count` log-spaced radii.
  double partition_defect(double r_lo, double r_hi, int count) const {
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      const double r = r_lo * std::pow(r_hi / r_lo, t);
      worst = std::max(worst, std::abs(partition_sum(r) - 1.0));
    }
    return worst;
  }

  double partition_sum(double r) const {
    if (r <= 0.0) return 0.0;
    const auto [lo, hi] = levels_touching(r);
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) s += bump(r, j);
    return s;
  }

  /// Levels j whose bump annulus [3/4, 8/3] 2^j contains r.
  static std::pair<int, int> levels_touching(double r) {
    const int lo = static_cast<int>(std::ceil(std::log2(r / kBumpOuter)));
    const int hi = static_cast<int>(std::floor(std::log2(r / kBumpInner)));
    return {lo, hi};
  }

 private:
  explicit DyadicCutoffFamily(double s) : sharpness_(s) {}
  double mollifier(double x) const { return x <= 0.0 ? 0.0 : std::exp(-sharpness_ / x); }

  double sharpness_;
};

enum class Summation { One, Infinity };
enum class FrequencyRange { All, Low, High };

inline std::string to_string(Summation r) { return r == Summation::One ? "1" : "inf"; }
inline std::string to_string(FrequencyRange range) {
  switch (range) {
    case FrequencyRange::Low: return "low";
    case FrequencyRange::High: return "high";
    default: return "all";
  }
}

/// Besov exponents. Norm ranges: low = blocks j <= 0, high = blocks j >= -1.
struct BesovParams {
  double s = 0.0;
  int p = 2;
  Summation r = Summation::One;
  FrequencyRange range = FrequencyRange::All;
};

struct LevelRange {
  int j_min = 0;
  int j_max = -1;
  bool contains(int j) const { return j >= j_min && j <= j_max; }
  int count() const { return j_max - j_min + 1; }
};

/// Levels whose bump annulus meets the lattice. Uses
/// [ceil(log2 k_min) - 1, floor(log2 k_max) + 1], widened if needed so that
/// every lattice radius up to the corner sqrt(2) k_max is covered.
inline LevelRange resolvable_levels(const Grid& g) {
  const double kmin = g.k_fundamental();
  const double kmax = g.k_nyquist();
  int lo = static_cast<int>(std::ceil(std::log2(kmin))) - 1;
  int hi = static_cast<int>(std::floor(std::log2(kmax))) + 1;
  lo = std::min(lo, DyadicCutoffFamily::levels_touching(kmin).first);
  hi = std::max(hi, DyadicCutoffFamily::levels_touching(std::sqrt(2.0) * kmax).second);
  return {lo, hi};
}

/// Per-level L^2 norms of the dyadic blocks of one (scalar or vector) field.
struct BlockNorms {
  LevelRange levels;
  std::vector<double> norms;  // indexed by j - levels.j_min
  double at(int j) const { return levels.contains(j) ? norms[j - levels.j_min] : 0.0; }
};

/// Output of block(): the field plus whether level j meets the lattice at all.
struct BlockResult {
  SpectralField field;
  bool resolvable = true;
};

struct NormReport {
  std::string norm_kind;
  double s = 0.0;
  Summation r = Summation::One;
  FrequencyRange range = FrequencyRange::All;
  double value = 0.0;
  std::vector<std::pair<int, double>> j_contributions;

  nlohmann::json to_json() const {
    nlohmann::json contrib = nlohmann::json::array();
    for (const auto& [j, v] : j_contributions) contrib.push_back({j, v});
    return {{"norm_kind", norm_kind}, {"s", s},      {"r", to_string(r)},
            {"range", to_string(range)}, {"value", value}, {"j_contributions", contrib}};
  }
};

inline NormReport norm_report_from_json(const nlohmann::json& j) {
  NormReport rep;
  rep.norm_kind = j.at("norm_kind").get<std::string>();
  rep.s = j.at("s").get<double>();
  const auto r = j.at("r").get<std::string>();
  if (r == "1") rep.r = Summation::One;
  else if (r == "inf") rep.r = Summation::Infinity;
  else throw FormatError("norm report: unknown r '" + r + "'");
  const auto range = j.at("range").get<std::string>();
  if (range == "all") rep.range = FrequencyRange::All;
  else if (range == "low") rep.range = FrequencyRange::Low;
  else if (range == "high") rep.range = FrequencyRange::High;
  else throw FormatError("norm report: unknown range '" + range + "'");
  rep.value = j.at("value").get<double>();
  for (const auto& c : j.at("j_contributions")) {
    rep.j_contributions.emplace_back(c.at(0).get<int>(), c.at(1).get<double>());
  }
  return rep;
}

/// Levels selected by a frequency range, clipped to what the grid resolves.
inline LevelRange levels_for(FrequencyRange range, const LevelRange& all) {
  switch (range) {
    case FrequencyRange::Low: return {all.j_min, std::min(all.j_max, 0)};
    case FrequencyRange::High: return {std::max(all.j_min, -1), all.j_max};
    default: return all;
  }
}

/// l^r combination of 2^{js} ||Delta_j f|| over the selected range.
inline double besov_from_blocks(const BlockNorms& blocks, const BesovParams& params) {
  if (params.p != 2) throw DomainError("only p = 2 Besov norms are supported");
  const LevelRange sel = levels_for(params.range, blocks.levels);
  double acc = 0.0;
  for (int j = sel.j_min; j <= sel.j_max; ++j) {
    const double term = std::exp2(j * params.s) * blocks.at(j);
    acc = params.r == Summation::One ? acc + term : std::max(acc, term);
  }
  return acc;
}

/// Precomputed bump weights for one grid: each lattice mode meets at most two
/// consecutive levels.
class DyadicAnalysis {
 public:
  DyadicAnalysis(GridPtr grid, DyadicCutoffFamily family)
      : grid_(std::move(grid)), family_(family), levels_(resolvable_levels(*grid_)) {
    const std::size_t size = grid_->spectral_size();
    first_level_.assign(size, 0);
    weight_lo_.assign(size, 0.0);
    weight_hi_.assign(size, 0.0);
    for (std::size_t i = 1; i < size; ++i) {
      const double r = grid_->k_norm(i);
      const auto [lo, hi] = DyadicCutoffFamily::levels_touching(r);
      first_level_[i] = lo;
      weight_lo_[i] = family_.bump(r, lo);
      if (hi > lo) weight_hi_[i] = family_.bump(r, lo + 1);
    }
  }

  const GridPtr& grid_ptr() const { return grid_; }
  const Grid& grid() const { return *grid_; }
  const DyadicCutoffFamily& family() const { return family_; }
  const LevelRange& levels() const { return levels_; }

  /// psi(2^-j k) for stored mode i.
  double weight(std::size_t i, int j) const {
    if (i == 0) return 0.0;
    if (j == first_level_[i]) return weight_lo_[i];
    if (j == first_level_[i] + 1) return weight_hi_[i];
    return 0.0;
  }

  BlockResult block(const SpectralField& f, int j) const {
    check_grid(f);
    if (!levels_.contains(j)) {
      return {SpectralField::zeros(f.grid_ptr()), false};
    }
    return {apply_multiplier(f, [&](std::size_t i) { return weight(i, j); }), true};
  }

  BlockNorms block_norms(const SpectralField& f) const {
    check_grid(f);
    std::vector<double> sq(levels_.count(), 0.0);
    accumulate(f, sq);
    for (auto& v : sq) v = std::sqrt(v);
    return {levels_, std::move(sq)};
  }

  /// Block norms of a vector field (Euclidean norm of the components).
  BlockNorms block_norms(const VectorField& v) const {
    check_grid(v[0]);
    check_grid(v[1]);
    std::vector<double> sq(levels_.count(), 0.0);
    accumulate(v[0], sq);
    accumulate(v[1], sq);
    for (auto& x : sq) x = std::sqrt(x);
    return {levels_, std::move(sq)};
  }

  double besov_norm(const SpectralField& f, const BesovParams& params) const {
    return besov_from_blocks(block_norms(f), params);
  }
  double besov_norm(const VectorField& v, const BesovParams& params) const {
    return besov_from_blocks(block_norms(v), params);
  }

  NormReport besov_report(const SpectralField& f, const BesovParams& params) const {
    const BlockNorms b = block_norms(f);
    NormReport rep{"besov", params.s, params.r, params.range, besov_from_blocks(b, params), {}};
    const LevelRange sel = levels_for(params.range, b.levels);
    for (int j = sel.j_min; j <= sel.j_max; ++j) {
      rep.j_contributions.emplace_back(j, std::exp2(j * params.s) * b.at(j));
    }
    return rep;
  }

  /// (sum_{j <= -1} Delta_j f, sum_{j >= 0} Delta_j f).
  std::pair<SpectralField, SpectralField> low_high_split(const SpectralField& f) const {
    check_grid(f);
    auto low = apply_multiplier(f, [&](std::size_t i) { return level_sum(i, levels_.j_min, -1); });
    auto high = apply_multiplier(f, [&](std::size_t i) { return level_sum(i, 0, levels_.j_max); });
    return {std::move(low), std::move(high)};
  }

  /// Sum of psi(2^-j k) over j in [lo, hi] for mode i.
  double level_sum(std::size_t i, int lo, int hi) const {
    if (i == 0) return 0.0;
    double s = 0.0;
    const int j0 = first_level_[i];
    if (j0 >= lo && j0 <= hi) s += weight_lo_[i];
    if (j0 + 1 >= lo && j0 + 1 <= hi) s += weight_hi_[i];
    return s;
  }

 private:
  void check_grid(const SpectralField& f) const {
    if (f.empty() || !f.grid().same_as(*grid_)) {
      throw DimensionMismatch("field grid does not match the dyadic analysis grid");
    }
  }

  void accumulate(const SpectralField& f, std::vector<double>& sq) const {
    const auto c = f.coefficients();
    for (std::size_t i = 1; i < c.size(); ++i) {
      const double e = grid_->mode_weight(i) * std::norm(c[i]);
      if (e == 0.0) continue;
      const int j0 = first_level_[i];
      if (levels_.contains(j0)) sq[j0 - levels_.j_min] += weight_lo_[i] * weight_lo_[i] * e;
      if (weight_hi_[i] != 0.0 && levels_.contains(j0 + 1)) {
        sq[j0 + 1 - levels_.j_min] += weight_hi_[i] * weight_hi_[i] * e;
      }
    }
  }

  GridPtr grid_;
  DyadicCutoffFamily family_;
  LevelRange levels_;
  std::vector<int> first_level_;
  std::vector<double> weight_lo_, weight_hi_;
};

/// Shared analysis with the default cutoff profile, cached per (n, L).
inline std::shared_ptr<const DyadicAnalysis> default_analysis(const GridPtr& grid) {
  static std::mutex mutex;
  static auto* cache = new std::map<std::pair<int, double>, std::shared_ptr<const DyadicAnalysis>>();
  std::lock_guard<std::mutex> lock(mutex);
  const auto key = std::make_pair(grid->n(), grid->box_length());
  auto it = cache->find(key);
  if (it != cache->end()) return it->second;
  auto a = std::make_shared<const DyadicAnalysis>(grid, DyadicCutoffFamily::build());
  cache->emplace(key, a);
  return a;
}

inline DyadicCutoffFamily build_cutoffs(double sharpness = 1.0) {
  return DyadicCutoffFamily::build(sharpness);
}

/// Delta_j f with the default cutoffs.
inline BlockResult block(const SpectralField& f, int j) {
  return default_analysis(f.grid_ptr())->block(f, j);
}

inline double besov_norm(const SpectralField& f, const BesovParams& params) {
  return default_analysis(f.grid_ptr())->besov_norm(f, params);
}

inline double besov_norm(const VectorField& v, const BesovParams& params) {
  return default_analysis(v[0].grid_ptr())->besov_norm(v, params);
}

inline std::pair<SpectralField, SpectralField> low_high_split(const SpectralField& f) {
  return default_analysis(f.grid_ptr())->low_high_split(f);
}

/// Chemin-Lerner norm from per-sample block norms: the time norm (trapezoid
/// rule for q = 1, max for q = inf) is taken per level before the l^r sum.
inline double chemin_lerner_from_blocks(std::span<const double> times,
                                        std::span<const BlockNorms> samples, Summation q,
                                        const BesovParams& params) {
  if (params.p != 2) throw DomainError("only p = 2 Besov norms are supported");
  if (times.size() != samples.size()) throw DimensionMismatch("times and samples differ in length");
  if (samples.empty()) throw DomainError("Chemin-Lerner norm needs at least one sample");
  if (q == Summation::One && samples.size() < 2) {
    throw DomainError("Chemin-Lerner norm with q = 1 needs at least two samples");
  }
  if (samples.size() >= 2) {
    const double h = times[1] - times[0];
    if (!(h > 0.0)) throw DomainError("sample times must increase");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (std::abs((times[i] - times[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h))) {
        throw DomainError("Chemin-Lerner samples must be uniformly spaced");
      }
    }
  }
  const LevelRange sel = levels_for(params.range, samples.front().levels);
  double acc = 0.0;
  for (int j = sel.j_min; j <= sel.j_max; ++j) {
    double inner = 0.0;
    if (q == Summation::Infinity) {
      for (const auto& s : samples) inner = std::max(inner, s.at(j));
    } else {
      for (std::size_t i = 1; i < samples.size(); ++i) {
        inner += 0.5 * (times[i] - times[i - 1]) * (samples[i].at(j) + samples[i - 1].at(j));
      }
    }
    const double term = std::exp2(j * params.s) * inner;
    acc = params.r == Summation::One ? acc + term : std::max(acc, term);
  }
  return acc;
}

/// ||u||_{L~^q_T(B^s_{2,r})} over a uniformly sampled field sequence.
inline double chemin_lerner_norm(std::span<const double> times, std::span<const SpectralField> fields,
                                 Summation q, const BesovParams& params) {
  if (fields.empty()) throw DomainError("Chemin-Lerner norm needs at least one sample");
  const auto analysis = default_analysis(fields.front().grid_ptr());
  std::vector<BlockNorms> blocks;
  blocks.reserve(fields.size());
  for (const auto& f : fields) blocks.push_back(analysis->block_norms(f));
  return chemin_lerner_from_blocks(times, blocks, q, params);
}

/// [Delta_j, w . grad] f = Delta_j(w . grad f) - w . grad(Delta_j f), with
/// dealiased products.
inline SpectralField block_commutator(const VectorField& w, const SpectralField& f, int j) {
  w[0].require_same_grid(f);
  w[1].require_same_grid(f);
  const auto analysis = default_analysis(f.grid_ptr());
  const auto outer = analysis->block(advect(w, f, true), j).field;
  const auto inner = advect(w, analysis->block(f, j).field, true);
  return outer - inner;
}

}  // namespace mhd25

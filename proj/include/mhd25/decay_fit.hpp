#pragma once

// Power-law fits value ~ C (1 + t)^p by least squares in log-log space.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mhd25/error.hpp"

namespace mhd25 {

struct FitWindow {
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  /// Fraction of the selected samples dropped from the end of the window.
  double trim_tail = 0.0;
};

struct DecayFit {
  double exponent = 0.0;
  double standard_error = 0.0;
  double log_prefactor = 0.0;
  std::size_t samples = 0;
  double t_first = 0.0;
  double t_last = 0.0;
};

inline DecayFit fit_decay(std::span<const double> times, std::span<const double> values,
                          const FitWindow& window = {}) {
  if (times.size() != values.size()) throw DimensionMismatch("fit_decay: length mismatch");
  if (!(window.trim_tail >= 0.0 && window.trim_tail < 1.0)) {
    throw DomainError("fit_decay: trim_tail must lie in [0, 1)");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= window.t_min && times[i] <= window.t_max) idx.push_back(i);
  }
  const auto keep = static_cast<std::size_t>(
      std::floor(static_cast<double>(idx.size()) * (1.0 - window.trim_tail) + 1e-9));
  idx.resize(std::min(idx.size(), keep));
  if (idx.size() < 3) throw DomainError("fit_decay: fewer than 3 samples in the window");

  const double t0 = times[idx.front()];
  const double t1 = times[idx.back()];
  if ((1.0 + t1) / (1.0 + t0) < 10.0 * (1.0 - 1e-12)) {
    throw DomainError("fit_decay: window spans less than one decade in 1 + t");
  }

  std::vector<double> x, y;
  for (std::size_t i : idx) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw DomainError("fit_decay: values must be positive and finite in the window");
    }
    x.push_back(std::log(1.0 + times[i]));
    y.push_back(std::log(values[i]));
  }
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double icpt = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (icpt + slope * x[i]);
    rss += r * r;
  }
  DecayFit fit;
  fit.exponent = slope;
  fit.standard_error = std::sqrt(rss / std::max(1.0, m - 2.0) / sxx);
  fit.log_prefactor = icpt;
  fit.samples = x.size();
  fit.t_first = t0;
  fit.t_last = t1;
  return fit;
}

}  // namespace mhd25

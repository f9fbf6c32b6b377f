#pragma once

// Periodic 2D grid, real-to-complex transforms and spectral operators.
//
// Normalization: coefficients are field averages against exp(-i k.x), so a
// constant field c has zero-mode coefficient c and
//
//     (1/n^2) sum |values|^2 == sum over the full lattice of |coefficients|^2.
//
// Only the half spectrum (x1 wavenumbers 0..n/2) is stored; the other half is
// implied by conjugate symmetry. All L^2 norms in this library are the
// box-averaged (root-mean-square) norm that matches this convention.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhd25/error.hpp"

namespace mhd25 {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// FFTW plans for one grid size. Execution goes through the new-array
// interface so a single plan can serve every field of that size.
class FftPlans {
 public:
  explicit FftPlans(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    const std::size_t real_size = static_cast<std::size_t>(n) * n;
    const std::size_t spec_size = static_cast<std::size_t>(n) * (n / 2 + 1);
    double* r = fftw_alloc_real(real_size);
    fftw_complex* c = fftw_alloc_complex(spec_size);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_2d(n, n, r, c, flags);
    backward_ = fftw_plan_dft_c2r_2d(n, n, c, r, flags);
    fftw_free(r);
    fftw_free(c);
    if (forward_ == nullptr || backward_ == nullptr) {
      throw Error("FFTW plan creation failed for n = " + std::to_string(n));
    }
  }
  ~FftPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  void forward(const double* in, Complex* out) const {
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
  }
  // The c2r transform overwrites its input.
  void backward(Complex* in, double* out) const {
    fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in), out);
  }
  int n() const { return n_; }

 private:
  int n_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

inline std::shared_ptr<const FftPlans> plans_for(int n) {
  static std::mutex cache_mutex;
  // Intentionally leaked: plans must outlive every static field.
  static auto* cache = new std::map<int, std::shared_ptr<const FftPlans>>();
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache->find(n);
  if (it != cache->end()) return it->second;
  auto plans = std::make_shared<const FftPlans>(n);
  cache->emplace(n, plans);
  return plans;
}

}  // namespace detail

/// Square periodic grid with n points per axis and period L on each axis.
class Grid {
 public:
  Grid(int n, double box_length) : n_(n), box_length_(box_length) {
    if (n < 16 || !std::has_single_bit(static_cast<unsigned>(n))) {
      throw DomainError("grid size must be a power of two >= 16, got " +
                        std::to_string(n));
    }
    if (!(box_length > 0.0) || !std::isfinite(box_length)) {
      throw DomainError("box length must be positive and finite");
    }
    const int cols = n / 2 + 1;
    const std::size_t size = static_cast<std::size_t>(n) * cols;
    kx_.resize(size);
    ky_.resize(size);
    k2_.resize(size);
    kabs_.resize(size);
    shell_.resize(size);
    const double k0 = k_fundamental();
    for (int row = 0; row < n; ++row) {
      const int m2 = signed_row(row);
      for (int col = 0; col < cols; ++col) {
        const std::size_t idx = static_cast<std::size_t>(row) * cols + col;
        kx_[idx] = k0 * col;
        ky_[idx] = k0 * m2;
        shell_[idx] = col * col + m2 * m2;
        k2_[idx] = k0 * k0 * static_cast<double>(shell_[idx]);
        kabs_[idx] = std::sqrt(k2_[idx]);
      }
    }
    plans_ = detail::plans_for(n);
  }

  int n() const { return n_; }
  double box_length() const { return box_length_; }
  double k_fundamental() const { return 2.0 * std::numbers::pi / box_length_; }
  double k_nyquist() const { return std::numbers::pi * n_ / box_length_; }
  double spacing() const { return box_length_ / n_; }
  double area() const { return box_length_ * box_length_; }
  double coordinate(int i) const { return spacing() * i; }

  std::size_t num_points() const { return static_cast<std::size_t>(n_) * n_; }
  int half_columns() const { return n_ / 2 + 1; }
  std::size_t spectral_size() const {
    return static_cast<std::size_t>(n_) * half_columns();
  }
  int signed_row(int row) const { return row <= n_ / 2 ? row : row - n_; }
  std::size_t spectral_index(int row, int col) const {
    return static_cast<std::size_t>(row) * half_columns() + col;
  }
  int column_of(std::size_t idx) const {
    return static_cast<int>(idx % half_columns());
  }
  int row_of(std::size_t idx) const {
    return static_cast<int>(idx / half_columns());
  }

  double kx(std::size_t idx) const { return kx_[idx]; }
  double ky(std::size_t idx) const { return ky_[idx]; }
  double k_squared(std::size_t idx) const { return k2_[idx]; }
  double k_norm(std::size_t idx) const { return kabs_[idx]; }
  /// Integer squared lattice radius m1^2 + m2^2.
  int shell(std::size_t idx) const { return shell_[idx]; }

  bool is_nyquist_x(std::size_t idx) const { return column_of(idx) == n_ / 2; }
  bool is_nyquist_y(std::size_t idx) const { return row_of(idx) == n_ / 2; }
  bool is_nyquist(std::size_t idx) const {
    return is_nyquist_x(idx) || is_nyquist_y(idx);
  }
  /// Multiplicity of a stored mode in full-lattice sums (conjugate partner).
  double mode_weight(std::size_t idx) const {
    const int col = column_of(idx);
    return (col == 0 || col == n_ / 2) ? 1.0 : 2.0;
  }

  bool same_as(const Grid& other) const {
    return n_ == other.n_ && box_length_ == other.box_length_;
  }

  const detail::FftPlans& plans() const { return *plans_; }

 private:
  int n_;
  double box_length_;
  std::vector<double> kx_, ky_, k2_, kabs_;
  std::vector<int> shell_;
  std::shared_ptr<const detail::FftPlans> plans_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int n, double box_length) {
  return std::make_shared<const Grid>(n, box_length);
}

namespace detail {

inline Spectrum forward(const Grid& grid, std::span<const double> values) {
  if (values.size() != grid.num_points()) {
    throw DimensionMismatch("field has " + std::to_string(values.size()) +
                            " samples, grid expects " +
                            std::to_string(grid.num_points()));
  }
  Spectrum out(grid.spectral_size());
  grid.plans().forward(values.data(), out.data());
  const double scale = 1.0 / static_cast<double>(grid.num_points());
  for (auto& c : out) c *= scale;
  return out;
}

inline std::vector<double> inverse(const Grid& grid, std::span<const Complex> coeffs) {
  if (coeffs.size() != grid.spectral_size()) {
    throw DimensionMismatch("spectrum has " + std::to_string(coeffs.size()) +
                            " modes, grid expects " +
                            std::to_string(grid.spectral_size()));
  }
  Spectrum scratch(coeffs.begin(), coeffs.end());
  std::vector<double> out(grid.num_points());
  grid.plans().backward(scratch.data(), out.data());
  return out;
}

}  // namespace detail

/// A real scalar field stored in both physical and spectral form. The two
/// representations are kept consistent by every constructor.
class SpectralField {
 public:
  SpectralField() = default;

  static SpectralField from_values(GridPtr grid, std::vector<double> values) {
    SpectralField f;
    f.coeffs_ = detail::forward(*grid, values);
    f.values_ = std::move(values);
    f.grid_ = std::move(grid);
    return f;
  }

  static SpectralField from_coefficients(GridPtr grid, Spectrum coeffs) {
    SpectralField f;
    f.values_ = detail::inverse(*grid, coeffs);
    f.coeffs_ = std::move(coeffs);
    f.grid_ = std::move(grid);
    return f;
  }

  static SpectralField zeros(GridPtr grid) {
    SpectralField f;
    f.values_.assign(grid->num_points(), 0.0);
    f.coeffs_.assign(grid->spectral_size(), Complex{});
    f.grid_ = std::move(grid);
    return f;
  }

  static SpectralField constant(GridPtr grid, double c) {
    SpectralField f = zeros(std::move(grid));
    std::fill(f.values_.begin(), f.values_.end(), c);
    f.coeffs_[0] = c;
    return f;
  }

  /// Samples fn(x1, x2) at the grid points.
  template <typename Fn>
  static SpectralField sample(GridPtr grid, Fn&& fn) {
    const int n = grid->n();
    std::vector<double> v(grid->num_points());
    for (int iy = 0; iy < n; ++iy) {
      const double x2 = grid->coordinate(iy);
      for (int ix = 0; ix < n; ++ix) {
        v[static_cast<std::size_t>(iy) * n + ix] = fn(grid->coordinate(ix), x2);
      }
    }
    return from_values(std::move(grid), std::move(v));
  }

  bool empty() const { return !grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Grid& grid() const { return *grid_; }
  std::span<const double> values() const { return values_; }
  std::span<const Complex> coefficients() const { return coeffs_; }
  double value(int ix, int iy) const {
    return values_[static_cast<std::size_t>(iy) * grid_->n() + ix];
  }

  /// The zero mode, i.e. the box average.
  double mean() const { return coeffs_.empty() ? 0.0 : coeffs_[0].real(); }

  /// Coefficient at signed lattice indices (m1 along x1, m2 along x2).
  Complex coefficient(int m1, int m2) const {
    const int n = grid_->n();
    if (std::abs(m1) > n / 2 || std::abs(m2) > n / 2) {
      throw DomainError("lattice index outside the grid");
    }
    const bool conj = m1 < 0;
    if (conj) {
      m1 = -m1;
      m2 = -m2;
    }
    const int row = ((m2 % n) + n) % n;
    const Complex c = coeffs_[grid_->spectral_index(row, m1)];
    return conj ? std::conj(c) : c;
  }

  /// Box-averaged L^2 norm, computed from the spectrum.
  double l2_norm() const { return std::sqrt(energy()); }
  /// Mean square over the box.
  double energy() const {
    double s = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      s += grid_->mode_weight(i) * std::norm(coeffs_[i]);
    }
    return s;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  SpectralField& operator+=(const SpectralField& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  SpectralField& operator*=(double c) {
    for (auto& v : values_) v *= c;
    for (auto& z : coeffs_) z *= c;
    return *this;
  }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(SpectralField a, double c) { return a *= c; }
  friend SpectralField operator*(double c, SpectralField a) { return a *= c; }
  friend SpectralField operator-(SpectralField a) { return a *= -1.0; }

  void require_same_grid(const SpectralField& o) const {
    if (!grid_ || !o.grid_ || !grid_->same_as(*o.grid_)) {
      throw DimensionMismatch("fields live on different grids");
    }
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
  Spectrum coeffs_;
};

using VectorField = std::array<SpectralField, 2>;

/// Builds a field from physical samples (coefficients computed).
inline SpectralField transform(GridPtr grid, std::vector<double> values) {
  return SpectralField::from_values(std::move(grid), std::move(values));
}
/// Recomputes the coefficients of `field` from its samples.
inline SpectralField transform(const SpectralField& field) {
  return transform(field.grid_ptr(),
                   std::vector<double>(field.values().begin(), field.values().end()));
}
/// Builds a field from a half spectrum (samples computed).
inline SpectralField inverse_transform(GridPtr grid, Spectrum coeffs) {
  return SpectralField::from_coefficients(std::move(grid), std::move(coeffs));
}
/// Recomputes the samples of `field` from its coefficients.
inline SpectralField inverse_transform(const SpectralField& field) {
  return inverse_transform(field.grid_ptr(),
                           Spectrum(field.coefficients().begin(), field.coefficients().end()));
}

/// Left and right sides of the discrete Parseval identity.
inline std::pair<double, double> parseval_sums(const SpectralField& f) {
  double phys = 0.0;
  for (double v : f.values()) phys += v * v;
  phys /= static_cast<double>(f.grid().num_points());
  return {phys, f.energy()};
}

/// Multiplies every stored mode by mult(index).
template <typename Mult>
SpectralField apply_multiplier(const SpectralField& f, Mult&& mult) {
  Spectrum out(f.coefficients().begin(), f.coefficients().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mult(i);
  return SpectralField::from_coefficients(f.grid_ptr(), std::move(out));
}

/// Spectral derivative along axis 0 (x1) or 1 (x2). Nyquist modes of the
/// differentiated axis are dropped so the result stays real.
inline SpectralField partial(const SpectralField& f, int axis) {
  const Grid& g = f.grid();
  return apply_multiplier(f, [&](std::size_t i) -> Complex {
    if (axis == 0) return g.is_nyquist_x(i) ? Complex{} : Complex{0.0, g.kx(i)};
    return g.is_nyquist_y(i) ? Complex{} : Complex{0.0, g.ky(i)};
  });
}

inline VectorField gradient(const SpectralField& f) { return {partial(f, 0), partial(f, 1)}; }

inline SpectralField divergence(const VectorField& v) {
  v[0].require_same_grid(v[1]);
  const Grid& g = v[0].grid();
  Spectrum out(g.spectral_size());
  const auto c1 = v[0].coefficients();
  const auto c2 = v[1].coefficients();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Complex d1 = g.is_nyquist_x(i) ? Complex{} : Complex{0.0, g.kx(i)} * c1[i];
    const Complex d2 = g.is_nyquist_y(i) ? Complex{} : Complex{0.0, g.ky(i)} * c2[i];
    out[i] = d1 + d2;
  }
  return SpectralField::from_coefficients(v[0].grid_ptr(), std::move(out));
}

inline SpectralField laplacian(const SpectralField& f) {
  const Grid& g = f.grid();
  return apply_multiplier(f, [&](std::size_t i) { return Complex{-g.k_squared(i), 0.0}; });
}

/// Lambda^gamma = (-Laplacian)^(gamma/2), gamma in (-1, 1]. The zero mode is
/// mapped to 0 for gamma > 0, kept for gamma == 0, and must vanish for
/// gamma < 0.
inline SpectralField fractional_lambda(const SpectralField& f, double gamma) {
  if (!(gamma > -1.0 && gamma <= 1.0)) {
    throw DomainError("fractional_lambda: gamma must lie in (-1, 1]");
  }
  if (gamma < 0.0) {
    const double scale = std::max(1.0, f.l2_norm());
    if (std::abs(f.mean()) > 1e-13 * scale) {
      throw DomainError("fractional_lambda: negative power applied to a field with nonzero mean");
    }
  }
  const Grid& g = f.grid();
  return apply_multiplier(f, [&](std::size_t i) -> Complex {
    if (i == 0) return gamma == 0.0 ? 1.0 : 0.0;
    return std::pow(g.k_norm(i), gamma);
  });
}

/// True when the mode survives the 2/3 rule.
inline bool dealias_keeps(const Grid& g, std::size_t i) {
  const double cut = (2.0 / 3.0) * g.k_nyquist();
  return std::max(std::abs(g.kx(i)), std::abs(g.ky(i))) <= cut * (1.0 + 1e-14);
}

inline void dealias_in_place(const Grid& g, Spectrum& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!dealias_keeps(g, i)) s[i] = Complex{};
  }
}

/// Zeroes every mode with max(|k1|, |k2|) > (2/3) k_max.
inline SpectralField dealias(const SpectralField& f) {
  const Grid& g = f.grid();
  return apply_multiplier(f, [&](std::size_t i) { return dealias_keeps(g, i) ? 1.0 : 0.0; });
}

/// Zeroes the Nyquist row and column.
inline void drop_nyquist_in_place(const Grid& g, Spectrum& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (g.is_nyquist(i)) s[i] = Complex{};
  }
}

/// Pointwise map in physical space, re-transformed.
template <typename Fn>
SpectralField pointwise(const SpectralField& f, Fn&& fn) {
  std::vector<double> v(f.values().begin(), f.values().end());
  for (auto& x : v) x = fn(x);
  return SpectralField::from_values(f.grid_ptr(), std::move(v));
}

/// Pointwise product; optionally 2/3-dealiased.
inline SpectralField product(const SpectralField& f, const SpectralField& g, bool dealiased = true) {
  f.require_same_grid(g);
  std::vector<double> v(f.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.values()[i] * g.values()[i];
  auto p = SpectralField::from_values(f.grid_ptr(), std::move(v));
  return dealiased ? dealias(p) : p;
}

/// Advection w . grad f with the product evaluated in physical space.
inline SpectralField advect(const VectorField& w, const SpectralField& f, bool dealiased = true) {
  const auto grad = gradient(f);
  std::vector<double> v(f.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = w[0].values()[i] * grad[0].values()[i] + w[1].values()[i] * grad[1].values()[i];
  }
  auto p = SpectralField::from_values(f.grid_ptr(), std::move(v));
  return dealiased ? dealias(p) : p;
}

/// Mean of f*g over the box, computed spectrally.
inline double inner_product(const SpectralField& f, const SpectralField& g) {
  f.require_same_grid(g);
  const Grid& grid = f.grid();
  double s = 0.0;
  const auto a = f.coefficients();
  const auto b = g.coefficients();
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += grid.mode_weight(i) * (a[i] * std::conj(b[i])).real();
  }
  return s;
}

inline double inner_product(const VectorField& f, const VectorField& g) {
  return inner_product(f[0], g[0]) + inner_product(f[1], g[1]);
}

// ---------------------------------------------------------------------------
// Field snapshot files: "MHD25FLD", u32 n, u32 count, then count row-major
// little-endian float64 arrays of n*n samples.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("snapshot truncated in header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline constexpr char kSnapshotMagic[8] = {'M', 'H', 'D', '2', '5', 'F', 'L', 'D'};

inline void write_snapshot(std::ostream& os, std::span<const SpectralField* const> fields) {
  if (fields.empty()) throw DomainError("snapshot needs at least one field");
  const Grid& g = fields.front()->grid();
  os.write(kSnapshotMagic, 8);
  detail::put_u32(os, static_cast<std::uint32_t>(g.n()));
  detail::put_u32(os, static_cast<std::uint32_t>(fields.size()));
  for (const SpectralField* f : fields) {
    fields.front()->require_same_grid(*f);
    for (double v : f->values()) detail::put_f64(os, v);
  }
  if (!os) throw FormatError("failed writing snapshot");
}

inline void write_snapshot(const std::string& path, std::span<const SpectralField* const> fields) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_snapshot(os, fields);
}

/// Reads a snapshot; the grid's n must match the header.
inline std::vector<SpectralField> read_snapshot(std::istream& is, const GridPtr& grid) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
    throw FormatError("not a field snapshot (bad magic)");
  }
  const std::uint32_t n = detail::get_u32(is);
  const std::uint32_t count = detail::get_u32(is);
  if (static_cast<int>(n) != grid->n()) {
    throw DimensionMismatch("snapshot has n = " + std::to_string(n) + ", grid has n = " +
                            std::to_string(grid->n()));
  }
  std::vector<SpectralField> out;
  out.reserve(count);
  std::vector<unsigned char> buf(grid->num_points() * 8);
  for (std::uint32_t k = 0; k < count; ++k) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw FormatError("snapshot truncated in field " + std::to_string(k));
    std::vector<double> v(grid->num_points());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = detail::get_f64(&buf[8 * i]);
    out.push_back(SpectralField::from_values(grid, std::move(v)));
  }
  return out;
}

inline std::vector<SpectralField> read_snapshot(const std::string& path, const GridPtr& grid) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_snapshot(is, grid);
}

/// Grid size recorded in a snapshot header.
inline int snapshot_grid_size(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
    throw FormatError("not a field snapshot (bad magic): " + path);
  }
  return static_cast<int>(detail::get_u32(is));
}

}  // namespace mhd25

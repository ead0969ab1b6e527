#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliffscale/error.hpp"
#include "cliffscale/rng.hpp"

namespace cliffscale::harmonic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Integer frequency vector with entries in [-B, B].
struct FrequencyVector {
  std::vector<int> v;

  bool is_zero() const {
    for (int c : v)
      if (c != 0) return false;
    return true;
  }
  bool operator==(const FrequencyVector&) const = default;
};

/// True for the canonical half: first nonzero coordinate positive, or all zero.
inline bool in_canonical_half(const FrequencyVector& f) {
  for (int c : f.v)
    if (c != 0) return c > 0;
  return true;
}

/// Order-preserving filter onto the canonical half-lattice.
inline std::vector<FrequencyVector> nneg(const std::vector<FrequencyVector>& vs) {
  std::vector<FrequencyVector> out;
  for (const auto& f : vs)
    if (in_canonical_half(f)) out.push_back(f);
  return out;
}

/// [-B, B]^d in lexicographic order, first coordinate slowest.
inline std::vector<FrequencyVector> full_lattice(int B, int d) {
  if (B < 0) throw ConfigError("bandlimit B must be nonnegative");
  if (d < 1) throw ConfigError("dimension d must be >= 1");
  std::vector<FrequencyVector> out;
  FrequencyVector cur{std::vector<int>(static_cast<std::size_t>(d), -B)};
  for (;;) {
    out.push_back(cur);
    int k = d - 1;
    while (k >= 0 && cur.v[static_cast<std::size_t>(k)] == B) cur.v[static_cast<std::size_t>(k--)] = -B;
    if (k < 0) break;
    ++cur.v[static_cast<std::size_t>(k)];
  }
  return out;
}

inline std::vector<FrequencyVector> canonical_frequencies(int B, int d) { return nneg(full_lattice(B, d)); }

/// (2B + 1)^d, the size of the cos/sin basis.
inline std::int64_t basis_size(int B, int d) {
  std::int64_t k = 1;
  for (int i = 0; i < d; ++i) k *= 2 * B + 1;
  return k;
}

template <typename Point>
double phase(const FrequencyVector& f, const Point& x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < f.v.size(); ++j) acc += f.v[j] * x[static_cast<Eigen::Index>(j)];
  return 2.0 * std::numbers::pi * acc;
}

/// Sum over canonical v of a_v cos(2 pi v.x) plus, over nonzero canonical v,
/// b_v sin(2 pi v.x).
struct HarmonicFunction {
  int B = 0;
  int d = 2;
  std::vector<FrequencyVector> cos_freqs;
  std::vector<double> cos_coeffs;
  std::vector<FrequencyVector> sin_freqs;
  std::vector<double> sin_coeffs;

  /// All-zero coefficients on the canonical bandlimit-B basis.
  static HarmonicFunction zeros(int B, int d) {
    HarmonicFunction h;
    h.B = B;
    h.d = d;
    h.cos_freqs = canonical_frequencies(B, d);
    for (const auto& f : h.cos_freqs)
      if (!f.is_zero()) h.sin_freqs.push_back(f);
    h.cos_coeffs.assign(h.cos_freqs.size(), 0.0);
    h.sin_coeffs.assign(h.sin_freqs.size(), 0.0);
    return h;
  }

  std::size_t coefficient_count() const { return cos_coeffs.size() + sin_coeffs.size(); }

  /// Exact squared L2 norm over the unit cube: a0^2 + (1/2) sum_{v != 0} (a_v^2 + b_v^2).
  double squared_norm() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < cos_freqs.size(); ++i)
      acc += (cos_freqs[i].is_zero() ? 1.0 : 0.5) * cos_coeffs[i] * cos_coeffs[i];
    for (double b : sin_coeffs) acc += 0.5 * b * b;
    return acc;
  }

  template <typename Point>
  double operator()(const Point& x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < cos_freqs.size(); ++i) acc += cos_coeffs[i] * std::cos(phase(cos_freqs[i], x));
    for (std::size_t i = 0; i < sin_freqs.size(); ++i) acc += sin_coeffs[i] * std::sin(phase(sin_freqs[i], x));
    return acc;
  }
};

template <typename Point>
double eval_harmonic(const HarmonicFunction& h, const Point& x) {
  return h(x);
}

/// Evaluates h at every column of `points` (d x m).
inline Vector eval_harmonic_batch(const HarmonicFunction& h, const Matrix& points) {
  Vector out(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) out[i] = h(points.col(i));
  return out;
}

/// I.i.d. standard normal coefficients, optionally rescaled to unit L2 norm.
inline HarmonicFunction sample_harmonic(int B, int d, Rng& rng, bool normalize = true) {
  auto h = HarmonicFunction::zeros(B, d);
  for (auto& a : h.cos_coeffs) a = rng.normal();
  for (auto& b : h.sin_coeffs) b = rng.normal();
  if (normalize) {
    const double norm = std::sqrt(h.squared_norm());
    if (norm > 0.0) {
      for (auto& a : h.cos_coeffs) a /= norm;
      for (auto& b : h.sin_coeffs) b /= norm;
    }
  }
  return h;
}

/// m x (2B+1)^d matrix of basis functions at `points` (d x m). Columns are
/// the cosines over the canonical half-lattice in lattice order, then the sines
/// over the same list without the zero frequency.
inline Matrix build_basis_matrix(int B, int d, const Matrix& points) {
  if (points.rows() != d) throw DataError("basis points must have " + std::to_string(d) + " rows");
  if (points.cols() < 1) throw DataError("basis matrix needs at least one point");
  const auto freqs = canonical_frequencies(B, d);
  const auto m = points.cols();
  Matrix V(m, basis_size(B, d));
  Eigen::Index col = 0;
  for (const auto& f : freqs) {
    for (Eigen::Index i = 0; i < m; ++i) V(i, col) = std::cos(phase(f, points.col(i)));
    ++col;
  }
  for (const auto& f : freqs) {
    if (f.is_zero()) continue;
    for (Eigen::Index i = 0; i < m; ++i) V(i, col) = std::sin(phase(f, points.col(i)));
    ++col;
  }
  return V;
}

/// Uniform points on [0,1]^d, one per column.
inline Matrix sample_unit_cube(int d, Eigen::Index m, Rng& rng) {
  Matrix pts(d, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) pts(j, i) = rng.uniform();
  return pts;
}

/// Monte-Carlo estimate of the energy of f outside the bandlimit-B span:
/// (1/m) |P y|^2 with P = I - V V^+ and y = f at the frozen sample points.
/// P is applied through an orthonormal basis Q of range(V), P y = y - Q (Q^T y),
/// so it never materializes as an m x m matrix.
class BandwidthRegularizer {
 public:
  BandwidthRegularizer(int B, int d, Matrix points, double lambda = 1.0)
      : B_(B), d_(d), lambda_(lambda), points_(std::move(points)) {
    if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw ConfigError("regularizer lambda must be finite and >= 0");
    basis_ = build_basis_matrix(B_, d_, points_);
    range_basis_ = orthonormal_range(basis_);
  }

  /// Orthonormal basis of range(V) from a thin SVD; singular values at or
  /// below max(rows, cols) * eps * sigma_max are dropped.
  static Matrix orthonormal_range(const Matrix& V) {
    Eigen::BDCSVD<Matrix> svd(V, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double cutoff = static_cast<double>(std::max(V.rows(), V.cols())) *
                          std::numeric_limits<double>::epsilon() * (sv.size() > 0 ? sv[0] : 0.0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > cutoff) ++rank;
    return svd.matrixU().leftCols(rank);
  }

  static BandwidthRegularizer sample(int B, int d, Eigen::Index m, double lambda, Rng& rng) {
    if (m < 1) throw ConfigError("regularizer sample count m must be >= 1");
    return BandwidthRegularizer(B, d, sample_unit_cube(d, m, rng), lambda);
  }

  int bandlimit() const { return B_; }
  int dim() const { return d_; }
  double lambda() const { return lambda_; }
  Eigen::Index sample_count() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  /// Rank of I - P.
  Eigen::Index span_rank() const { return range_basis_.cols(); }

  /// P y.
  Vector apply_residual(const Vector& y) const {
    check_length(y);
    return y - range_basis_ * (range_basis_.transpose() * y);
  }

  /// (1/m) |P y|^2, equal to (1/m) min_z |V z - y|^2.
  double value(const Vector& y) const {
    return apply_residual(y).squaredNorm() / static_cast<double>(sample_count());
  }

  /// Gradient of value() with respect to y: (2/m) P y.
  Vector gradient(const Vector& y) const {
    return apply_residual(y) * (2.0 / static_cast<double>(sample_count()));
  }

  /// Projection residual of y restricted to the pool rows `rows`, i.e. the same
  /// estimator built from that subset of sample points alone.
  Vector apply_residual_on_subset(std::span<const Eigen::Index> rows, const Vector& y_subset) const {
    if (static_cast<std::size_t>(y_subset.size()) != rows.size())
      throw DataError("subset values and subset rows differ in length");
    Matrix V(static_cast<Eigen::Index>(rows.size()), basis_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= sample_count()) throw DataError("subset row out of range");
      V.row(static_cast<Eigen::Index>(i)) = basis_.row(rows[i]);
    }
    const Matrix Q = orthonormal_range(V);
    return y_subset - Q * (Q.transpose() * y_subset);
  }

  const Matrix& basis_matrix() const { return basis_; }

  /// Dense P; only sensible for small m.
  Matrix projection_residual_matrix() const {
    const auto m = sample_count();
    return Matrix::Identity(m, m) - range_basis_ * range_basis_.transpose();
  }

 private:
  void check_length(const Vector& y) const {
    if (y.size() != sample_count())
      throw DataError("regularizer input has length " + std::to_string(y.size()) + ", expected " +
                      std::to_string(sample_count()));
  }

  int B_;
  int d_;
  double lambda_;
  Matrix points_;
  Matrix basis_;
  Matrix range_basis_;
};

inline double regularizer_value(const BandwidthRegularizer& reg, const Vector& y) { return reg.value(y); }
inline Vector regularizer_gradient(const BandwidthRegularizer& reg, const Vector& y) { return reg.gradient(y); }

}  // namespace cliffscale::harmonic

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cliffscale/error.hpp"

namespace cliffscale {

/// One grid point of a data-scaling curve: sample count n and the test error
/// observed in each trial.
struct CurvePoint {
  std::int64_t n = 0;
  std::vector<double> errors;

  bool operator==(const CurvePoint&) const = default;
};

using CurvePoints = std::vector<CurvePoint>;

enum class Statistic { kMedian, kMean };

/// Linear-interpolation percentile (p in [0, 100]) of an unsorted sample.
inline double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::span<const double> values) { return percentile(values, 50.0); }

inline double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// Per-n error measurements across trials. Immutable after construction;
/// the constructor enforces strictly increasing n, nonempty error lists and
/// finite nonnegative errors.
class ScalingCurve {
 public:
  using Metadata = std::map<std::string, std::string>;

  ScalingCurve() = default;

  explicit ScalingCurve(std::vector<CurvePoint> points, Metadata metadata = {})
      : points_(std::move(points)), metadata_(std::move(metadata)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (p.n < 1) throw DataError("curve point n must be a positive integer, got " + std::to_string(p.n));
      if (i > 0 && p.n <= points_[i - 1].n)
        throw DataError("curve n values must be strictly increasing (n=" + std::to_string(p.n) + ")");
      if (p.errors.empty()) throw DataError("curve point n=" + std::to_string(p.n) + " has no errors");
      for (double e : p.errors)
        if (!std::isfinite(e) || e < 0.0)
          throw DataError("curve point n=" + std::to_string(p.n) + " has a negative or non-finite error");
    }
  }

  const std::vector<CurvePoint>& points() const { return points_; }
  const Metadata& metadata() const { return metadata_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  std::vector<std::int64_t> ns() const {
    std::vector<std::int64_t> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(p.n);
    return out;
  }

  double median_at(std::size_t i) const { return median(points_.at(i).errors); }
  double mean_at(std::size_t i) const { return mean(points_.at(i).errors); }
  double percentile_at(std::size_t i, double p) const { return percentile(points_.at(i).errors, p); }
  double min_at(std::size_t i) const {
    const auto& e = points_.at(i).errors;
    return *std::min_element(e.begin(), e.end());
  }
  double max_at(std::size_t i) const {
    const auto& e = points_.at(i).errors;
    return *std::max_element(e.begin(), e.end());
  }
  double statistic_at(std::size_t i, Statistic s) const {
    return s == Statistic::kMedian ? median_at(i) : mean_at(i);
  }

  std::vector<double> statistic(Statistic s) const {
    std::vector<double> out;
    out.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) out.push_back(statistic_at(i, s));
    return out;
  }

  bool operator==(const ScalingCurve&) const = default;

 private:
  std::vector<CurvePoint> points_;
  Metadata metadata_;
};

/// A*n^-alpha + E with its log-space fit diagnostics.
struct PowerLawFit {
  double A = 0.0;
  double alpha = 0.0;
  double E = 0.0;
  double residual = 0.0;  // RMS misfit of log(error) over the fitted points
  std::int64_t n_min = 1;
  std::int64_t n_max = 2;

  double predict(double n) const { return A * std::pow(n, -alpha) + E; }

  void validate() const {
    if (!(A >= 0.0) || !(alpha >= 0.0) || !(E >= 0.0) || !(residual >= 0.0))
      throw DataError("power-law fit parameters must be nonnegative");
    if (!std::isfinite(A) || !std::isfinite(alpha) || !std::isfinite(E))
      throw DataError("power-law fit parameters must be finite");
    if (n_min >= n_max) throw DataError("power-law fit range must satisfy n_min < n_max");
  }
};

/// A maximal run of log-log concavity. Bounds are the outer stencil points of
/// the first and last qualifying second difference, so neighbouring regions
/// can share an endpoint but never overlap.
struct CliffRegion {
  std::int64_t n_start = 0;
  std::int64_t n_end = 0;
  double strength = 0.0;  // -sum of the run's second differences

  bool contains(std::int64_t n) const { return n_start <= n && n <= n_end; }
  bool intersects(std::int64_t lo, std::int64_t hi) const { return n_start <= hi && lo <= n_end; }
};

struct NRange {
  std::int64_t lo = 1;
  std::int64_t hi = std::numeric_limits<std::int64_t>::max();
};

inline constexpr double kDefaultErrorFloor = 1e-20;
inline constexpr double kDefaultCliffThreshold = -0.05;
inline constexpr std::size_t kDefaultMinRun = 2;

namespace detail {

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

inline LineFit ordinary_least_squares(std::span<const double> xs, std::span<const double> ys) {
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {my - slope * mx, slope};
}

struct FitAtFloor {
  double A = 0.0;
  double alpha = 0.0;
  double rms = std::numeric_limits<double>::infinity();
};

// For a fixed E, log-space OLS of log(err - E) against log n gives (log A, alpha).
// A positive slope would mean alpha < 0; alpha is then pinned to 0.
inline FitAtFloor fit_given_floor(std::span<const double> log_n, std::span<const double> err,
                                  std::span<const double> log_err, double E) {
  std::vector<double> shifted(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) shifted[i] = std::log(err[i] - E);
  auto line = ordinary_least_squares(log_n, shifted);
  FitAtFloor out;
  if (line.slope > 0.0) {
    out.alpha = 0.0;
    out.A = std::exp(mean(shifted));
  } else {
    out.alpha = -line.slope;
    out.A = std::exp(line.intercept);
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double model = out.A * std::exp(-out.alpha * log_n[i]) + E;
    const double r = log_err[i] - std::log(model);
    sq += r * r;
  }
  out.rms = std::sqrt(sq / static_cast<double>(err.size()));
  return out;
}

}  // namespace detail

/// Fits A*n^-alpha + E to the chosen per-n statistic by minimizing the
/// log-space RMS misfit. E is found by a coarse scan followed by golden-section
/// refinement over [0, 0.999 * min statistic]; for each candidate E the pair
/// (A, alpha) comes from OLS in log-log space.
inline PowerLawFit fit_power_law(const ScalingCurve& curve, std::optional<NRange> range = std::nullopt,
                                 Statistic statistic = Statistic::kMedian) {
  const NRange r = range.value_or(NRange{});
  std::vector<double> log_n, err, log_err;
  std::int64_t n_min = 0, n_max = 0;
  bool any_positive = false;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto n = curve.points()[i].n;
    if (n < r.lo || n > r.hi) continue;
    const double e = curve.statistic_at(i, statistic);
    if (e > 0.0) any_positive = true;
    if (log_n.empty()) n_min = n;
    n_max = n;
    log_n.push_back(std::log(static_cast<double>(n)));
    err.push_back(e);
  }
  if (log_n.size() < 4)
    throw DataError("power-law fit needs at least 4 distinct n values in range, got " +
                    std::to_string(log_n.size()));
  if (!any_positive) throw DataError("power-law fit is undefined on an all-zero error curve");
  for (double e : err)
    if (!(e > 0.0)) throw DataError("power-law fit requires positive errors (apply an error floor)");
  for (double e : err) log_err.push_back(std::log(e));

  const double e_hi = 0.999 * *std::min_element(err.begin(), err.end());
  auto objective = [&](double E) { return detail::fit_given_floor(log_n, err, log_err, E).rms; };

  // Coarse scan guards the golden-section step against multimodal objectives.
  constexpr int kScan = 256;
  int best = 0;
  double best_val = objective(0.0);
  for (int k = 1; k <= kScan; ++k) {
    const double v = objective(e_hi * k / kScan);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double a = e_hi * std::max(0, best - 1) / kScan;
  double b = e_hi * std::min(kScan, best + 1) / kScan;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < 200 && (b - a) > 1e-15 * std::max(1.0, e_hi); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  double E = 0.5 * (a + b);
  double val = objective(E);
  if (best_val < val) {
    E = e_hi * best / kScan;
    val = best_val;
  }
  const auto at = detail::fit_given_floor(log_n, err, log_err, E);
  PowerLawFit fit{at.A, at.alpha, E, at.rms, n_min, n_max};
  return fit;
}

/// Second derivative of log f(e^x) for f(n) = A n^-alpha + E. Written as
/// alpha^2 * s * (1 - s) with s = A / (A + E e^(alpha x)), which is the closed
/// form alpha^2 A E e^(alpha x) / (A + E e^(alpha x))^2 without overflow.
inline double powerlaw_loglog_convexity(const PowerLawFit& fit, double x) {
  if (fit.A <= 0.0 || fit.alpha <= 0.0 || fit.E <= 0.0) return 0.0;
  const double u = std::log(fit.A) - std::log(fit.E) - fit.alpha * x;
  const double s = 1.0 / (1.0 + std::exp(-u));
  const double t = 1.0 / (1.0 + std::exp(u));
  return fit.alpha * fit.alpha * s * t;
}

/// Three-point second differences on a non-uniform grid, one per interior point.
inline std::vector<double> nonuniform_second_differences(std::span<const double> xs,
                                                         std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("second differences: length mismatch");
  if (xs.size() < 3) throw DataError("second differences need at least 3 points");
  std::vector<double> out;
  out.reserve(xs.size() - 2);
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double h1 = xs[i] - xs[i - 1];
    const double h2 = xs[i + 1] - xs[i];
    out.push_back(2.0 * (h1 * ys[i + 1] - (h1 + h2) * ys[i] + h2 * ys[i - 1]) / (h1 * h2 * (h1 + h2)));
  }
  return out;
}

/// Centered second differences of log(statistic) against log n. Values below
/// `floor` are raised to it first; with floor = 0 a zero statistic is an error.
inline std::vector<std::pair<std::int64_t, double>> loglog_second_differences(
    const ScalingCurve& curve, Statistic statistic = Statistic::kMedian,
    double floor = kDefaultErrorFloor) {
  if (curve.size() < 3) throw DataError("second differences need at least 3 curve points");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    double v = std::max(curve.statistic_at(i, statistic), floor);
    if (!(v > 0.0))
      throw DataError("non-positive error at n=" + std::to_string(curve.points()[i].n) +
                      "; use a positive error floor");
    xs.push_back(std::log(static_cast<double>(curve.points()[i].n)));
    ys.push_back(std::log(v));
  }
  const auto diffs = nonuniform_second_differences(xs, ys);
  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) out.emplace_back(curve.points()[i + 1].n, diffs[i]);
  return out;
}

struct CliffOptions {
  double threshold = kDefaultCliffThreshold;
  std::size_t min_run = kDefaultMinRun;
  Statistic statistic = Statistic::kMedian;
  double floor = kDefaultErrorFloor;
};

/// Maximal runs of at least `min_run` consecutive second differences strictly
/// below `threshold`.
inline std::vector<CliffRegion> detect_cliffs(const ScalingCurve& curve, const CliffOptions& options = {}) {
  if (options.threshold > 0.0) throw ConfigError("cliff threshold must be nonpositive");
  if (options.min_run < 1) throw ConfigError("cliff min_run must be positive");
  if (curve.size() < options.min_run + 2)
    throw DataError("cliff detection needs at least min_run + 2 curve points");
  const auto diffs = loglog_second_differences(curve, options.statistic, options.floor);
  const auto& pts = curve.points();
  std::vector<CliffRegion> regions;
  std::size_t i = 0;
  while (i < diffs.size()) {
    if (!(diffs[i].second < options.threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double sum = 0.0;
    while (j < diffs.size() && diffs[j].second < options.threshold) sum += diffs[j++].second;
    if (j - i >= options.min_run) {
      // diffs[k] is centred on pts[k + 1]; its stencil spans pts[k]..pts[k + 2].
      regions.push_back({pts[i].n, pts[j + 1].n, -sum});
    }
    i = j;
  }
  return regions;
}

/// Groups raw (n, trial, error) triples into a curve. Within each n, errors
/// are stored in ascending trial order.
struct RawSample {
  std::int64_t n = 0;
  std::int64_t trial = 0;
  double error = 0.0;
};

inline ScalingCurve aggregate_trials(std::span<const RawSample> raw, ScalingCurve::Metadata metadata = {}) {
  if (raw.empty()) throw DataError("cannot aggregate an empty sample list");
  std::map<std::int64_t, std::map<std::int64_t, double>> grouped;
  for (const auto& s : raw) {
    if (s.n < 1) throw DataError("sample n must be >= 1, got " + std::to_string(s.n));
    if (s.trial < 0) throw DataError("sample trial must be >= 0, got " + std::to_string(s.trial));
    auto [it, inserted] = grouped[s.n].emplace(s.trial, s.error);
    if (!inserted)
      throw DataError("duplicate (n, trial) = (" + std::to_string(s.n) + ", " + std::to_string(s.trial) + ")");
  }
  std::vector<CurvePoint> points;
  points.reserve(grouped.size());
  for (const auto& [n, trials] : grouped) {
    CurvePoint p{n, {}};
    p.errors.reserve(trials.size());
    for (const auto& [t, e] : trials) p.errors.push_back(e);
    points.push_back(std::move(p));
  }
  return ScalingCurve(std::move(points), std::move(metadata));
}

/// Integer grid log-spaced between n_min and n_max with `per_decade` points per
/// decade, rounded and de-duplicated. Both endpoints are always included.
inline std::vector<std::int64_t> log_spaced_grid(std::int64_t n_min, std::int64_t n_max, double per_decade) {
  if (n_min < 1 || n_max < n_min) throw ConfigError("n-grid requires 1 <= n_min <= n_max");
  if (!(per_decade > 0.0)) throw ConfigError("points-per-decade must be positive");
  std::vector<std::int64_t> grid;
  const double lo = std::log10(static_cast<double>(n_min));
  const double hi = std::log10(static_cast<double>(n_max));
  const auto steps = static_cast<std::int64_t>(std::floor((hi - lo) * per_decade + 1e-9));
  for (std::int64_t k = 0; k <= steps; ++k) {
    const auto n = static_cast<std::int64_t>(std::llround(std::pow(10.0, lo + static_cast<double>(k) / per_decade)));
    const auto clamped = std::clamp(n, n_min, n_max);
    if (grid.empty() || clamped > grid.back()) grid.push_back(clamped);
  }
  if (grid.back() != n_max) grid.push_back(n_max);
  return grid;
}

}  // namespace cliffscale

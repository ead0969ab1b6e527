#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "cliffscale/error.hpp"
#include "cliffscale/format.hpp"
#include "cliffscale/parallel.hpp"
#include "cliffscale/rng.hpp"
#include "cliffscale/scaling_curves.hpp"

namespace cliffscale::gaussian {

using Vector = Eigen::VectorXd;

/// y ~ Unif{-1, +1}, x ~ N(y * s * e1, I_d).
struct GaussianTask {
  std::int64_t d = 1;
  double s = 0.0;

  void validate() const {
    if (d < 1) throw ConfigError("gaussian task dimension d must be >= 1");
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("signal-to-noise s must be finite and nonnegative");
  }
};

struct ClassifierWeights {
  Vector w;
};

struct LabeledDataset {
  Eigen::MatrixXd xs;  // one sample per row
  Vector ys;           // entries in {-1, +1}
};

/// Standard normal CDF through the complementary error function; erfc keeps
/// full relative accuracy in the lower tail.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline LabeledDataset sample_dataset(const GaussianTask& task, std::int64_t n, Rng& rng) {
  task.validate();
  if (n < 0) throw ConfigError("dataset size must be nonnegative");
  LabeledDataset data{Eigen::MatrixXd(n, task.d), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = (rng() >> 63) ? 1.0 : -1.0;
    data.ys[i] = y;
    for (Eigen::Index j = 0; j < task.d; ++j) data.xs(i, j) = rng.normal();
    data.xs(i, 0) += y * task.s;
  }
  return data;
}

/// w_hat = (1/n) sum y_i x_i.
inline ClassifierWeights estimate_weights(const LabeledDataset& data) {
  if (data.xs.rows() == 0) throw DataError("cannot estimate weights from an empty dataset");
  if (data.ys.size() != data.xs.rows()) throw DataError("label count does not match sample count");
  return {data.xs.transpose() * data.ys / static_cast<double>(data.xs.rows())};
}

/// Test error of sign(w.x): Phi(-s * w1 / |w|).
inline double exact_error(const GaussianTask& task, const ClassifierWeights& cw) {
  if (cw.w.size() != task.d) throw DataError("weight dimension does not match task dimension");
  const double norm = cw.w.norm();
  if (!(norm > 0.0)) throw DataError("exact error is undefined for the zero weight vector");
  return std_normal_cdf(-task.s * cw.w[0] / norm);
}

struct SimulatedError {
  double error = 0.5;
  bool degenerate = false;  // w_hat was exactly zero; error reported as chance
};

/// Full simulation: draw n samples, estimate w_hat, evaluate the exact error.
inline SimulatedError simulate_error(const GaussianTask& task, std::int64_t n, Rng& rng) {
  if (n < 1) throw ConfigError("simulate_error requires n >= 1");
  const auto data = sample_dataset(task, n, rng);
  const auto w = estimate_weights(data);
  if (w.w.squaredNorm() == 0.0) return {0.5, true};
  return {exact_error(task, w), false};
}

/// Phi(-margin) with margin = (s^2 + s eps/sqrt n) / sqrt(s^2 + 2 s eps/sqrt n + (eps^2 + chi2)/n).
inline double error_from_sufficient_statistics(double s, std::int64_t n, double eps, double chi2) {
  const double rn = std::sqrt(static_cast<double>(n));
  const double num = s * s + s * eps / rn;
  const double den_sq = s * s + 2.0 * s * eps / rn + (eps * eps + chi2) / static_cast<double>(n);
  if (!(den_sq > 0.0)) return 0.5;
  return std_normal_cdf(-num / std::sqrt(den_sq));
}

/// Samples the error through (eps ~ N(0,1), chi2 with d-1 dof); equal in
/// distribution to simulate_error at O(d) cost independent of n. d = 1 uses
/// chi2 = 0.
inline double sample_error_sufficient(const GaussianTask& task, std::int64_t n, Rng& rng) {
  task.validate();
  if (n < 1) throw ConfigError("sample_error_sufficient requires n >= 1");
  const double eps = rng.normal();
  const double chi2 = task.d >= 2 ? rng.chi_squared(static_cast<std::uint64_t>(task.d - 1)) : 0.0;
  return error_from_sufficient_statistics(task.s, n, eps, chi2);
}

/// Quantile of the chi-squared distribution with `dof` degrees of freedom
/// (dof = 0 is the point mass at zero).
inline double chi_squared_quantile(std::int64_t dof, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("chi-squared quantile level must lie in (0, 1)");
  if (dof < 0) throw ConfigError("chi-squared degrees of freedom must be nonnegative");
  if (dof == 0) return 0.0;
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(static_cast<double>(dof)), q);
}

/// Large-n expansion Phi(-s) + e^(-s^2/2) / (sqrt(8 pi) s) * q / n where q is
/// the requested chi-squared(d-1) quantile.
inline double asymptotic_error(const GaussianTask& task, std::int64_t n, double chi2_quantile = 0.5) {
  task.validate();
  if (!(task.s > 0.0)) throw ConfigError("asymptotic expansion is undefined at s = 0");
  if (n < 1) throw ConfigError("asymptotic_error requires n >= 1");
  const double q = chi_squared_quantile(task.d - 1, chi2_quantile);
  const double coeff = std::exp(-0.5 * task.s * task.s) / (std::sqrt(8.0 * std::numbers::pi) * task.s);
  return std_normal_cdf(-task.s) + coeff * q / static_cast<double>(n);
}

/// Closed-form cliff curve Phi(-s / sqrt(1 + d / (n s^2))); 0.5 at s = 0.
inline double approx_error(const GaussianTask& task, double n) {
  task.validate();
  if (!(n >= 1.0)) throw ConfigError("approx_error requires n >= 1");
  if (task.s == 0.0) return 0.5;
  const double ratio = static_cast<double>(task.d) / (n * task.s * task.s);
  return std_normal_cdf(-task.s / std::sqrt(1.0 + ratio));
}

enum class Sampler { kFull, kSufficient };

inline std::string to_string(Sampler s) { return s == Sampler::kFull ? "full" : "sufficient"; }

struct ScalingConfig {
  GaussianTask task{100, 1.0};
  Sampler sampler = Sampler::kSufficient;
  std::vector<std::int64_t> n_grid;
  std::int64_t trials = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

inline ScalingCurve run_gaussian_scaling(const ScalingConfig& cfg) {
  cfg.task.validate();
  if (cfg.n_grid.empty()) throw ConfigError("n_grid must be nonempty");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] < 1 || (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]))
      throw ConfigError("n_grid must be strictly ascending positive integers");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t cells = cfg.n_grid.size() * trials;
  std::vector<double> errors(cells);
  std::vector<char> degenerate(cells, 0);
  parallel_for(cells, cfg.threads, [&](std::size_t cell) {
    const std::size_t ni = cell / trials;
    const std::size_t trial = cell % trials;
    Rng rng(cfg.seed, Purpose::kData, trial, ni);
    if (cfg.sampler == Sampler::kFull) {
      const auto r = simulate_error(cfg.task, cfg.n_grid[ni], rng);
      errors[cell] = r.error;
      degenerate[cell] = r.degenerate;
    } else {
      errors[cell] = sample_error_sufficient(cfg.task, cfg.n_grid[ni], rng);
    }
  });
  std::vector<CurvePoint> points;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const auto first = errors.begin() + static_cast<std::ptrdiff_t>(ni * trials);
    points.push_back({cfg.n_grid[ni], std::vector<double>(first, first + cfg.trials)});
  }
  std::size_t n_degenerate = 0;
  for (char c : degenerate) n_degenerate += c;
  ScalingCurve::Metadata meta{{"task", "gaussian"},
                              {"d", std::to_string(cfg.task.d)},
                              {"s", format_double(cfg.task.s)},
                              {"sampler", to_string(cfg.sampler)},
                              {"seed", std::to_string(cfg.seed)}};
  if (n_degenerate > 0) meta["degenerate_trials"] = std::to_string(n_degenerate);
  return ScalingCurve(std::move(points), std::move(meta));
}

/// The closed-form approximation sampled on an n grid as a one-trial curve.
inline ScalingCurve approx_curve(const GaussianTask& task, const std::vector<std::int64_t>& n_grid) {
  std::vector<CurvePoint> points;
  for (auto n : n_grid) points.push_back({n, {approx_error(task, static_cast<double>(n))}});
  return ScalingCurve(std::move(points), {{"task", "gaussian-approx"},
                                          {"d", std::to_string(task.d)},
                                          {"s", format_double(task.s)}});
}

}  // namespace cliffscale::gaussian

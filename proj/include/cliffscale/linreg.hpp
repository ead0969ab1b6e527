#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliffscale/error.hpp"
#include "cliffscale/format.hpp"
#include "cliffscale/parallel.hpp"
#include "cliffscale/rng.hpp"
#include "cliffscale/scaling_curves.hpp"

namespace cliffscale::linreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Learn f(x) = v.x from y = v.x + sigma * noise.
struct LinearTask {
  Vector v;
  double sigma = 0.0;

  Eigen::Index dim() const { return v.size(); }
};

/// Row i of xs is the i-th covariate vector.
struct RegressionDataset {
  Matrix xs;
  Vector ys;

  Eigen::Index size() const { return xs.rows(); }
  Eigen::Index dim() const { return xs.cols(); }
};

struct LinearEstimate {
  Vector v_hat;
};

/// v uniform on the unit sphere (normalized Gaussian draw).
inline LinearTask sample_task(std::int64_t d, double sigma, Rng& rng) {
  if (d < 1) throw ConfigError("linear task dimension d must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and nonnegative");
  Vector v(d);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
    norm = v.norm();
  } while (norm == 0.0);
  return {v / norm, sigma};
}

inline RegressionDataset sample_dataset(const LinearTask& task, std::int64_t n, Rng& rng) {
  if (n < 0) throw ConfigError("dataset size must be nonnegative");
  const auto d = task.dim();
  RegressionDataset data{Matrix(n, d), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.xs(i, j) = rng.normal();
    double y = data.xs.row(i).dot(task.v);
    if (task.sigma > 0.0) y += task.sigma * rng.normal();
    data.ys[i] = y;
  }
  return data;
}

/// Minimum-norm least-squares solution X^+ y. Singular values below
/// max(n, d) * eps * sigma_max are treated as zero.
inline LinearEstimate fit_least_squares(const RegressionDataset& data) {
  const auto n = data.size();
  const auto d = data.dim();
  if (n == 0) return {Vector::Zero(d)};
  Eigen::BDCSVD<Matrix> svd(data.xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double tol = static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
  svd.setThreshold(tol);
  return {svd.solve(data.ys)};
}

/// (X^T X + lambda I)^-1 X^T y.
inline LinearEstimate fit_ridge(const RegressionDataset& data, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be positive and finite");
  Matrix gram = data.xs.transpose() * data.xs;
  gram.diagonal().array() += lambda;
  const Vector rhs = data.xs.transpose() * data.ys;
  return {gram.llt().solve(rhs)};
}

/// Exact test MSE for x ~ N(0, I): E[(v_hat.x - v.x)^2] = |v_hat - v|^2.
inline double linear_test_mse(const LinearTask& task, const LinearEstimate& est) {
  if (est.v_hat.size() != task.dim())
    throw DataError("estimate dimension " + std::to_string(est.v_hat.size()) + " does not match task dimension " +
                    std::to_string(task.dim()));
  return (est.v_hat - task.v).squaredNorm();
}

/// 1-nearest-neighbour prediction; ties go to the lowest index.
inline double nn_predict(const RegressionDataset& data, const Eigen::Ref<const Vector>& x) {
  if (data.size() == 0) throw DataError("nearest-neighbour prediction on an empty dataset");
  if (x.size() != data.dim()) throw DataError("query dimension does not match dataset dimension");
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double dist = (data.xs.row(i).transpose() - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return data.ys[best];
}

inline constexpr std::int64_t kDefaultNnTestPoints = 10'000;

/// Monte-Carlo MSE of the 1-NN estimator against noiseless targets.
inline double nn_test_mse(const LinearTask& task, const RegressionDataset& data, std::int64_t n_test, Rng& rng) {
  if (data.size() == 0) throw DataError("nearest-neighbour test error on an empty dataset");
  if (n_test < 1) throw ConfigError("n_test must be positive");
  const auto d = task.dim();
  // Squared distances via |q|^2 - 2 q.x + |x|^2, evaluated in blocks.
  const Vector train_sq = data.xs.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 256;
  double acc = 0.0;
  Matrix queries(kBlock, d);
  for (std::int64_t start = 0; start < n_test; start += kBlock) {
    const auto rows = static_cast<Eigen::Index>(std::min<std::int64_t>(kBlock, n_test - start));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index j = 0; j < d; ++j) queries(r, j) = rng.normal();
    const Matrix cross = queries.topRows(rows) * data.xs.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double dist = train_sq[i] - 2.0 * cross(r, i);
        if (dist < best_dist) {
          best_dist = dist;
          best = i;
        }
      }
      const double diff = data.ys[best] - queries.row(r).dot(task.v);
      acc += diff * diff;
    }
  }
  return acc / static_cast<double>(n_test);
}

enum class Estimator { kLeastSquares, kRidge, kNearestNeighbor };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kLeastSquares: return "lstsq";
    case Estimator::kRidge: return "ridge";
    case Estimator::kNearestNeighbor: return "nn";
  }
  return "?";
}

struct ScalingConfig {
  std::int64_t d = 5;
  double sigma = 0.0;
  Estimator estimator = Estimator::kLeastSquares;
  double lambda = 1.0;
  std::int64_t n_test = kDefaultNnTestPoints;
  bool fixed_task = false;  // reuse trial 0's task in every trial
  std::vector<std::int64_t> n_grid;
  std::int64_t trials = 50;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

inline double trial_error(const ScalingConfig& cfg, std::int64_t n, std::size_t n_index, std::int64_t trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  Rng task_rng(cfg.seed, Purpose::kTask, cfg.fixed_task ? 0 : t, 0);
  const auto task = sample_task(cfg.d, cfg.sigma, task_rng);
  Rng data_rng(cfg.seed, Purpose::kData, t, n_index);
  const auto data = sample_dataset(task, n, data_rng);
  switch (cfg.estimator) {
    case Estimator::kLeastSquares: return linear_test_mse(task, fit_least_squares(data));
    case Estimator::kRidge: return linear_test_mse(task, fit_ridge(data, cfg.lambda));
    case Estimator::kNearestNeighbor: {
      Rng test_rng(cfg.seed, Purpose::kTest, t, n_index);
      return nn_test_mse(task, data, cfg.n_test, test_rng);
    }
  }
  return 0.0;
}

/// Fresh task and dataset per trial; every (n, trial) cell has its own streams.
inline ScalingCurve run_linreg_scaling(const ScalingConfig& cfg) {
  if (cfg.n_grid.empty()) throw ConfigError("n_grid must be nonempty");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 1 || (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]))
      throw ConfigError("n_grid must be strictly ascending positive integers");
  }
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.estimator == Estimator::kRidge && !(cfg.lambda > 0.0)) throw ConfigError("ridge lambda must be positive");
  const std::size_t cells = cfg.n_grid.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<double> errors(cells);
  parallel_for(cells, cfg.threads, [&](std::size_t cell) {
    const std::size_t ni = cell / static_cast<std::size_t>(cfg.trials);
    const auto trial = static_cast<std::int64_t>(cell % static_cast<std::size_t>(cfg.trials));
    errors[cell] = trial_error(cfg, cfg.n_grid[ni], ni, trial);
  });
  std::vector<CurvePoint> points;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const auto first = errors.begin() + static_cast<std::ptrdiff_t>(ni * static_cast<std::size_t>(cfg.trials));
    points.push_back({cfg.n_grid[ni], std::vector<double>(first, first + cfg.trials)});
  }
  ScalingCurve::Metadata meta{{"task", "linreg"},
                              {"estimator", to_string(cfg.estimator)},
                              {"d", std::to_string(cfg.d)},
                              {"sigma", format_double(cfg.sigma)},
                              {"seed", std::to_string(cfg.seed)}};
  if (cfg.estimator == Estimator::kRidge) meta["lambda"] = format_double(cfg.lambda);
  return ScalingCurve(std::move(points), std::move(meta));
}

}  // namespace cliffscale::linreg

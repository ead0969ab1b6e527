#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliffscale/error.hpp"
#include "cliffscale/format.hpp"
#include "cliffscale/harmonic.hpp"
#include "cliffscale/mlp.hpp"
#include "cliffscale/parallel.hpp"
#include "cliffscale/rng.hpp"
#include "cliffscale/scaling_curves.hpp"

namespace cliffscale::harmonic {

struct TrainConfig {
  int width = 256;
  int hidden_layers = 3;
  nn::AdamHyperparameters adam{};
  std::int64_t batch_size = 256;
  std::int64_t max_steps = 20'000;
  std::int64_t patience = 1'000;   // steps without validation improvement
  std::int64_t eval_every = 10;    // validation cadence in steps
  std::int64_t val_size = 512;
  std::int64_t test_size = 4'096;
  bool reuse_validation_as_test = false;
  // Bandwidth regularizer; used only when regularize is set.
  bool regularize = false;
  int reg_bandlimit = 2;
  std::int64_t reg_points = 20'000;
  double reg_lambda = 1.0;
  // Regularizer points used per step: 0 means the whole frozen pool through the
  // cached projection; otherwise a fresh random subset of the pool per step.
  std::int64_t reg_batch = 0;

  void validate() const {
    if (width < 1 || hidden_layers < 0) throw ConfigError("width must be >= 1 and hidden_layers >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_steps < 0 || patience < 1 || eval_every < 1) throw ConfigError("max_steps, patience and eval_every must be positive");
    if (val_size < 1 || test_size < 1) throw ConfigError("val_size and test_size must be >= 1");
    if (regularize && (reg_bandlimit < 0 || reg_points < 1 || !(reg_lambda >= 0.0)))
      throw ConfigError("regularizer needs bandlimit >= 0, reg_points >= 1 and lambda >= 0");
    if (reg_batch < 0) throw ConfigError("reg_batch must be nonnegative");
    if (!(adam.step_size > 0.0)) throw ConfigError("step size must be positive");
  }
};

struct TrainResult {
  nn::MlpModel model;
  double test_mse = 0.0;
  double validation_mse = 0.0;
  double regularizer = 0.0;  // regularizer value at the final checkpoint (0 when unregularized)
  std::int64_t steps = 0;
  bool early_stopped = false;
};

namespace detail {

inline double mse(const nn::RowVector& pred, const Vector& target) {
  return (pred.transpose() - target).squaredNorm() / static_cast<double>(target.size());
}

}  // namespace detail

/// Trains an MLP on n noiseless samples of `target`. Minibatch loss is the
/// batch MSE plus lambda times the regularizer evaluated at all of its points.
/// Early stopping keeps the checkpoint at the moment of stopping. All
/// randomness comes from streams keyed by `stream_seed`.
inline TrainResult train(const HarmonicFunction& target, std::int64_t n, const TrainConfig& cfg,
                         const BandwidthRegularizer* reg, std::uint64_t stream_seed) {
  cfg.validate();
  if (n < 0) throw ConfigError("training set size must be nonnegative");
  const int d = target.d;
  if (reg && reg->dim() != d) throw ConfigError("regularizer dimension does not match target");

  Rng data_rng(stream_seed, Purpose::kData);
  Rng val_rng(stream_seed, Purpose::kValidation);
  Rng test_rng(stream_seed, Purpose::kTest);
  Rng init_rng(stream_seed, Purpose::kInit);
  Rng shuffle_rng(stream_seed, Purpose::kShuffle);

  const Matrix train_x = sample_unit_cube(d, n, data_rng);
  const Vector train_y = eval_harmonic_batch(target, train_x);
  const Matrix val_x = sample_unit_cube(d, cfg.val_size, val_rng);
  const Vector val_y = eval_harmonic_batch(target, val_x);

  auto model = nn::MlpModel::create(d, cfg.width, cfg.hidden_layers, init_rng);
  auto adam = nn::AdamState::for_model(model, cfg.adam);

  const Eigen::Index pool = reg ? reg->sample_count() : 0;
  const bool subsample = reg && cfg.reg_batch > 0 && cfg.reg_batch < pool;
  const Eigen::Index m = subsample ? static_cast<Eigen::Index>(cfg.reg_batch) : pool;
  std::vector<Eigen::Index> pool_order(subsample ? static_cast<std::size_t>(pool) : 0);
  std::iota(pool_order.begin(), pool_order.end(), Eigen::Index{0});
  Rng reg_rng(stream_seed, Purpose::kRegularizerPoints);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();

  double best_val = std::numeric_limits<double>::infinity();
  std::int64_t last_improvement = 0;
  TrainResult result;
  Matrix inputs;
  for (std::int64_t step = 0; step < cfg.max_steps; ++step) {
    // Next minibatch from the current epoch; reshuffle when exhausted.
    Eigen::Index b = 0;
    if (n > 0) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(std::span<Eigen::Index>(order));
        cursor = 0;
      }
      b = static_cast<Eigen::Index>(std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - cursor));
    }
    inputs.resize(d, b + m);
    for (Eigen::Index i = 0; i < b; ++i) inputs.col(i) = train_x.col(order[cursor + static_cast<std::size_t>(i)]);
    if (subsample) {
      // Partial Fisher-Yates: the first m entries become a uniform subset.
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto j = i + static_cast<Eigen::Index>(reg_rng.below(static_cast<std::uint64_t>(pool - i)));
        std::swap(pool_order[static_cast<std::size_t>(i)], pool_order[static_cast<std::size_t>(j)]);
        inputs.col(b + i) = reg->points().col(pool_order[static_cast<std::size_t>(i)]);
      }
    } else if (m > 0) {
      inputs.rightCols(m) = reg->points();
    }

    const auto cache = model.forward_cache(inputs);
    const nn::RowVector out = cache.output();
    nn::RowVector grad(b + m);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
      const double r = out[i] - train_y[order[cursor + static_cast<std::size_t>(i)]];
      loss += r * r / static_cast<double>(b);
      grad[i] = 2.0 * r / static_cast<double>(b);
    }
    if (m > 0) {
      const Vector y = out.tail(m).transpose();
      const Vector residual =
          subsample ? reg->apply_residual_on_subset(std::span<const Eigen::Index>(pool_order.data(), static_cast<std::size_t>(m)), y)
                    : reg->apply_residual(y);
      loss += reg->lambda() * residual.squaredNorm() / static_cast<double>(m);
      grad.tail(m) = (reg->lambda() * 2.0 / static_cast<double>(m)) * residual.transpose();
    }
    cursor += static_cast<std::size_t>(b);
    if (!std::isfinite(loss)) throw NumericalError("training diverged: non-finite loss at step " + std::to_string(step));

    nn::adam_step(adam, model, nn::mlp_backward(model, cache, grad));
    result.steps = step + 1;

    if ((step + 1) % cfg.eval_every == 0) {
      const double val = detail::mse(model.forward(val_x), val_y);
      if (val < best_val) {
        best_val = val;
        last_improvement = step + 1;
      } else if (step + 1 - last_improvement >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }

  result.validation_mse = detail::mse(model.forward(val_x), val_y);
  if (cfg.reuse_validation_as_test) {
    result.test_mse = result.validation_mse;
  } else {
    const Matrix test_x = sample_unit_cube(d, cfg.test_size, test_rng);
    result.test_mse = detail::mse(model.forward(test_x), eval_harmonic_batch(target, test_x));
  }
  if (reg) result.regularizer = reg->value(model.forward(reg->points()).transpose());
  result.model = std::move(model);
  return result;
}

enum class Arm { kRegularized, kUnregularized };

inline std::string to_string(Arm a) { return a == Arm::kRegularized ? "reg" : "noreg"; }

struct ScalingConfig {
  int bandlimit = 2;
  int d = 2;
  Arm arm = Arm::kRegularized;
  TrainConfig train{};
  std::vector<std::int64_t> n_grid;
  std::int64_t trials = 10;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Error of one (n, trial) cell. The target depends only on the trial; data,
/// initialization and regularizer points depend on (trial, n index).
inline TrainResult run_harmonic_cell(const ScalingConfig& cfg, std::size_t n_index, std::int64_t trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  Rng target_rng(cfg.seed, Purpose::kTarget, t, 0);
  const auto target = sample_harmonic(cfg.bandlimit, cfg.d, target_rng, true);
  auto train_cfg = cfg.train;
  train_cfg.regularize = cfg.arm == Arm::kRegularized;
  std::optional<BandwidthRegularizer> reg;
  if (train_cfg.regularize) {
    Rng reg_rng(cfg.seed, Purpose::kRegularizerPoints, t, n_index);
    reg = BandwidthRegularizer::sample(train_cfg.reg_bandlimit, cfg.d, train_cfg.reg_points, train_cfg.reg_lambda, reg_rng);
  }
  const auto stream = derive_stream(cfg.seed, Purpose::kData, t, n_index);
  return train(target, cfg.n_grid[n_index], train_cfg, reg ? &*reg : nullptr, stream);
}

inline ScalingCurve run_harmonic_scaling(const ScalingConfig& cfg) {
  cfg.train.validate();
  if (cfg.bandlimit < 0) throw ConfigError("bandlimit must be nonnegative");
  if (cfg.d < 1 || cfg.d > 3) throw ConfigError("harmonic dimension must be 1, 2 or 3");
  if (cfg.n_grid.empty()) throw ConfigError("n_grid must be nonempty");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] < 1 || (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]))
      throw ConfigError("n_grid must be strictly ascending positive integers");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t cells = cfg.n_grid.size() * trials;
  std::vector<double> errors(cells);
  parallel_for(cells, cfg.threads, [&](std::size_t cell) {
    errors[cell] = run_harmonic_cell(cfg, cell / trials, static_cast<std::int64_t>(cell % trials)).test_mse;
  });
  std::vector<CurvePoint> points;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const auto first = errors.begin() + static_cast<std::ptrdiff_t>(ni * trials);
    points.push_back({cfg.n_grid[ni], std::vector<double>(first, first + cfg.trials)});
  }
  ScalingCurve::Metadata meta{{"task", "harmonic"},
                              {"arm", to_string(cfg.arm)},
                              {"bandlimit", std::to_string(cfg.bandlimit)},
                              {"d", std::to_string(cfg.d)},
                              {"width", std::to_string(cfg.train.width)},
                              {"seed", std::to_string(cfg.seed)}};
  if (cfg.arm == Arm::kRegularized) {
    meta["reg_points"] = std::to_string(cfg.train.reg_points);
    meta["lambda"] = format_double(cfg.train.reg_lambda);
  }
  return ScalingCurve(std::move(points), std::move(meta));
}

}  // namespace cliffscale::harmonic

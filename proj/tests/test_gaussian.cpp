#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cliffscale/gaussian.hpp"
#include "test_oracles.hpp"

using namespace cliffscale;
using namespace cliffscale::gaussian;
using Catch::Approx;

TEST_CASE("std_normal_cdf", "[gaussian][cdf]") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  // Independent Maclaurin-series oracle, then the frozen reference value.
  CHECK(std::abs(std_normal_cdf(-1.0) - oracle::normal_cdf_series(-1.0)) <= 1e-14);
  CHECK(std_normal_cdf(-1.0) == Approx(0.158655253931).margin(1e-10));
  for (double x : {-3.0, -2.0, -0.5, 0.3, 1.7, 2.5})
    CHECK(std::abs(std_normal_cdf(x) - oracle::normal_cdf_series(x)) <= 1e-14);

  Rng rng(1);
  double prev = 0.0;
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double p = std_normal_cdf(x);
    REQUIRE(p >= prev);
    prev = p;
  }
  for (int i = 0; i < 1000; ++i) {
    const double x = 10.0 * (2.0 * rng.uniform() - 1.0);
    REQUIRE(std::abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-14);
  }
}

TEST_CASE("estimate_weights", "[gaussian]") {
  LabeledDataset one{Eigen::MatrixXd(1, 3), Vector(1)};
  one.xs << 1.0, -2.0, 0.5;
  one.ys << 1.0;
  CHECK(estimate_weights(one).w == one.xs.row(0).transpose());

  Rng rng(2);
  const GaussianTask task{4, 1.5};
  const auto data = sample_dataset(task, 30, rng);
  LabeledDataset doubled{Eigen::MatrixXd(60, 4), Vector(60)};
  doubled.xs << data.xs, -data.xs;
  doubled.ys << data.ys, -data.ys;
  CHECK((estimate_weights(doubled).w - estimate_weights(data).w).norm() < 1e-14);

  LabeledDataset empty{Eigen::MatrixXd(0, 3), Vector(0)};
  REQUIRE_THROWS_AS(estimate_weights(empty), DataError);

  // E[y x] = s e1.
  const GaussianTask big{10, 2.0};
  Vector expected = Vector::Zero(10);
  expected[0] = 2.0;
  CHECK((estimate_weights(sample_dataset(big, 1'000'000, rng)).w - expected).norm() < 0.01);
}

TEST_CASE("exact_error", "[gaussian]") {
  Vector e1 = Vector::Zero(3);
  e1[0] = 1.0;
  CHECK(exact_error({3, 0.0}, {e1}) == 0.5);
  Vector orth(3);
  orth << 0.0, 1.0, -2.0;
  CHECK(exact_error({3, 4.0}, {orth}) == 0.5);
  CHECK(exact_error({3, 1.0}, {e1}) == Approx(0.158655253931).margin(1e-10));
  REQUIRE_THROWS_AS(exact_error({3, 1.0}, {Vector::Zero(3)}), DataError);
  REQUIRE_THROWS_AS(exact_error({3, 1.0}, {Vector::Zero(2)}), DataError);
}

TEST_CASE("exact_error symmetries", "[gaussian][property]") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const GaussianTask task{5, 3.0 * rng.uniform()};
    Vector w(5);
    for (Eigen::Index j = 0; j < 5; ++j) w[j] = rng.normal();
    const double c = 0.01 + 100.0 * rng.uniform();
    const double base = exact_error(task, {w});
    REQUIRE(exact_error(task, {c * w}) == Approx(base).epsilon(1e-12));
    REQUIRE(exact_error(task, {-w}) == Approx(1.0 - base).margin(1e-14));
  }
}

TEST_CASE("simulate_error", "[gaussian]") {
  SECTION("no signal gives median chance error") {
    Rng rng(4);
    std::vector<double> errs;
    for (int t = 0; t < 401; ++t) errs.push_back(simulate_error({20, 0.0}, 10, rng).error);
    CHECK(median(errs) == 0.5);
  }
  SECTION("large n approaches the irreducible error") {
    Rng rng(5);
    std::vector<double> errs;
    for (int t = 0; t < 21; ++t) errs.push_back(simulate_error({100, 1.0}, 200'000, rng).error);
    CHECK(median(errs) == Approx(std_normal_cdf(-1.0)).margin(0.002));
  }
  SECTION("invalid n") {
    Rng rng(6);
    REQUIRE_THROWS_AS(simulate_error({3, 1.0}, 0, rng), ConfigError);
  }
}

TEST_CASE("sample_error_sufficient", "[gaussian]") {
  const double s = 1.3;
  // Deterministic plug-in eps = 0, chi2 = d - 1.
  const std::int64_t d = 30, n = 17;
  CHECK(error_from_sufficient_statistics(s, n, 0.0, d - 1.0) ==
        Approx(std_normal_cdf(-s * s / std::sqrt(s * s + (d - 1.0) / n))).epsilon(1e-14));
  // n -> infinity.
  CHECK(error_from_sufficient_statistics(s, 1'000'000'000'000, 0.7, 29.0) == Approx(std_normal_cdf(-s)).epsilon(1e-5));

  Rng rng(7);
  REQUIRE_NOTHROW(sample_error_sufficient({1, 1.0}, 5, rng));
  REQUIRE_THROWS_AS(sample_error_sufficient({3, 1.0}, 0, rng), ConfigError);
}

TEST_CASE("full and sufficient samplers agree in distribution", "[gaussian][ks]") {
  const GaussianTask task{30, 1.0};
  std::vector<double> full, suff;
  Rng a(8), b(9);
  for (int i = 0; i < 10'000; ++i) {
    full.push_back(simulate_error(task, 50, a).error);
    suff.push_back(sample_error_sufficient(task, 50, b));
  }
  CHECK(oracle::ks_statistic(full, suff) < 0.03);
}

TEST_CASE("chi-squared sampling paths agree", "[gaussian][rng]") {
  Rng a(10), b(11);
  std::vector<double> by_sum, by_gamma;
  for (int i = 0; i < 5000; ++i) {
    by_sum.push_back(a.chi_squared_by_sum(99));
    by_gamma.push_back(b.chi_squared_by_gamma(99));
  }
  CHECK(mean(by_sum) == Approx(99.0).epsilon(0.01));
  CHECK(mean(by_gamma) == Approx(99.0).epsilon(0.01));
  CHECK(oracle::ks_statistic(by_sum, by_gamma) < 0.04);
}

TEST_CASE("chi_squared_quantile", "[gaussian]") {
  // chi2 with 2 dof is exponential with mean 2: median = 2 ln 2.
  CHECK(chi_squared_quantile(2, 0.5) == Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(chi_squared_quantile(0, 0.5) == 0.0);
  REQUIRE_THROWS_AS(chi_squared_quantile(3, 1.0), ConfigError);
}

TEST_CASE("asymptotic_error", "[gaussian]") {
  const GaussianTask task{50, 1.2};
  const double floor = std_normal_cdf(-1.2);
  CHECK(asymptotic_error(task, 1'000'000'000) == Approx(floor).epsilon(1e-7));
  const double e1 = asymptotic_error(task, 1000) - floor;
  const double e2 = asymptotic_error(task, 2000) - floor;
  CHECK(e2 == Approx(e1 / 2).epsilon(1e-12));
  REQUIRE_THROWS_AS(asymptotic_error({50, 0.0}, 10), ConfigError);
}

TEST_CASE("asymptotic_error matches simulation at large n", "[gaussian][montecarlo]") {
  const GaussianTask task{1000, 1.0};
  std::vector<double> errs;
  for (int t = 0; t < 10'000; ++t) {
    Rng rng(12, Purpose::kData, static_cast<std::uint64_t>(t));
    errs.push_back(sample_error_sufficient(task, 100'000, rng));
  }
  CHECK(std::abs(median(errs) - asymptotic_error(task, 100'000)) < 0.002);
}

TEST_CASE("approx_error", "[gaussian]") {
  const GaussianTask task{100, 2.0};
  CHECK(approx_error(task, 1e12) == Approx(std_normal_cdf(-2.0)).epsilon(1e-9));
  CHECK(approx_error(task, 25.0) == Approx(std_normal_cdf(-2.0 / std::sqrt(2.0))).epsilon(1e-14));
  CHECK(approx_error({100, 0.0}, 10.0) == 0.5);
  CHECK(approx_error({1'000'000'000, 0.01}, 1.0) == Approx(0.5).margin(1e-6));
  REQUIRE_THROWS_AS(approx_error(task, 0.5), ConfigError);
}

TEST_CASE("approx_error monotonicity and scaling", "[gaussian][property]") {
  for (std::int64_t d : {1, 10, 100, 1000})
    for (double s : {0.25, 1.0, 3.0})
      for (double n = 1; n < 1e5; n *= 1.5) {
        const double e = approx_error({d, s}, n);
        REQUIRE(approx_error({d, s}, n * 1.5) < e);
        REQUIRE(approx_error({d, s * 1.1}, n) < e);
        REQUIRE(approx_error({d + 10, s}, n) > e);
        REQUIRE(approx_error({3 * d, s}, 3 * n) == Approx(e).epsilon(1e-14));
      }
}

TEST_CASE("run_gaussian_scaling", "[gaussian][scaling]") {
  ScalingConfig cfg;
  cfg.task = {30, 1.0};
  cfg.n_grid = {10, 100, 1000};
  cfg.trials = 2000;
  cfg.seed = 7;
  cfg.sampler = Sampler::kFull;
  const auto full = run_gaussian_scaling(cfg);
  cfg.sampler = Sampler::kSufficient;
  const auto suff = run_gaussian_scaling(cfg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(full.median_at(i) - suff.median_at(i)) < 0.01);
  CHECK(full.metadata().at("sampler") == "full");
  CHECK(suff.metadata().at("d") == "30");

  cfg.threads = 1;
  const auto one = run_gaussian_scaling(cfg);
  cfg.threads = 3;
  CHECK(run_gaussian_scaling(cfg) == one);
}

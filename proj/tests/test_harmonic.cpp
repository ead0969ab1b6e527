#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "cliffscale/harmonic.hpp"

using namespace cliffscale;
using namespace cliffscale::harmonic;
using Catch::Approx;

namespace {

FrequencyVector fv(std::initializer_list<int> v) { return {std::vector<int>(v)}; }

}  // namespace

TEST_CASE("canonical frequencies", "[harmonic]") {
  const auto got = canonical_frequencies(1, 2);
  const std::vector<FrequencyVector> expected{fv({0, 0}), fv({0, 1}), fv({1, -1}), fv({1, 0}), fv({1, 1})};
  CHECK(got == expected);
  CHECK(canonical_frequencies(0, 3) == std::vector<FrequencyVector>{fv({0, 0, 0})});
  REQUIRE_THROWS_AS(full_lattice(-1, 2), ConfigError);
  REQUIRE_THROWS_AS(full_lattice(1, 0), ConfigError);
}

TEST_CASE("canonical half picks one of each +/- pair", "[harmonic][property]") {
  for (int B = 0; B <= 4; ++B)
    for (int d = 1; d <= 3; ++d) {
      const auto full = full_lattice(B, d);
      const auto half = nneg(full);
      REQUIRE(static_cast<std::int64_t>(full.size()) == static_cast<std::int64_t>(std::pow(2 * B + 1, d)));
      REQUIRE(half.size() == (full.size() + 1) / 2);
      REQUIRE(basis_size(B, d) == static_cast<std::int64_t>(full.size()));
      for (const auto& f : full) {
        FrequencyVector neg = f;
        for (int& c : neg.v) c = -c;
        if (f.is_zero()) REQUIRE(in_canonical_half(f));
        else REQUIRE(in_canonical_half(f) != in_canonical_half(neg));
      }
    }
}

TEST_CASE("basis matrix", "[harmonic]") {
  SECTION("three equispaced points in one dimension") {
    Matrix pts(1, 3);
    pts << 0.0, 1.0 / 3.0, 2.0 / 3.0;
    const Matrix V = build_basis_matrix(1, 1, pts);
    REQUIRE(V.rows() == 3);
    REQUIRE(V.cols() == 3);
    CHECK(std::abs(V.determinant()) == Approx(3.0 * std::sqrt(3.0) / 2.0).epsilon(1e-12));
  }
  SECTION("columns are cosines then sines") {
    Matrix pts(2, 1);
    pts << 0.1, 0.3;
    const Matrix V = build_basis_matrix(1, 2, pts);
    const auto freqs = canonical_frequencies(1, 2);
    REQUIRE(V.cols() == 9);
    for (std::size_t k = 0; k < freqs.size(); ++k)
      CHECK(V(0, static_cast<Eigen::Index>(k)) == Approx(std::cos(phase(freqs[k], pts.col(0)))));
    CHECK(V(0, 5) == Approx(std::sin(phase(freqs[1], pts.col(0)))));
  }
  SECTION("empirical Gram matrix approaches diag(1, 1/2, ...)") {
    Rng rng(3);
    const Matrix pts = sample_unit_cube(2, 200'000, rng);
    const Matrix V = build_basis_matrix(1, 2, pts);
    const Matrix gram = V.transpose() * V / static_cast<double>(pts.cols());
    Matrix expected = Matrix::Identity(9, 9) * 0.5;
    expected(0, 0) = 1.0;
    CHECK((gram - expected).cwiseAbs().maxCoeff() < 0.01);
  }
  SECTION("bad shapes") {
    REQUIRE_THROWS_AS(build_basis_matrix(1, 2, Matrix(3, 4)), DataError);
    REQUIRE_THROWS_AS(build_basis_matrix(1, 2, Matrix(2, 0)), DataError);
  }
}

TEST_CASE("harmonic functions", "[harmonic]") {
  Rng rng(4);
  const auto h = sample_harmonic(2, 2, rng);
  CHECK(h.coefficient_count() == 25);
  CHECK(h.squared_norm() == Approx(1.0).epsilon(1e-12));

  // Periodic on the unit torus.
  Vector x(2), shifted(2);
  for (int k = 0; k < 50; ++k) {
    x << rng.uniform(), rng.uniform();
    shifted << x[0] + 1.0, x[1] - 2.0;
    REQUIRE(h(x) == Approx(h(shifted)).margin(1e-12));
  }

  // Monte-Carlo mean square matches the coefficient norm.
  const Matrix pts = sample_unit_cube(2, 200'000, rng);
  CHECK(eval_harmonic_batch(h, pts).squaredNorm() / 2e5 == Approx(1.0).epsilon(0.02));

  const auto z = HarmonicFunction::zeros(1, 3);
  CHECK(z.squared_norm() == 0.0);
  CHECK(eval_harmonic(z, Vector::Constant(3, 0.4)) == 0.0);
}

TEST_CASE("regularizer is zero on bandlimited functions", "[harmonic][regularizer]") {
  Rng rng(5);
  for (int B = 0; B <= 2; ++B)
    for (int d = 1; d <= 2; ++d) {
      const auto reg = BandwidthRegularizer::sample(B, d, 400, 1.0, rng);
      const auto h = sample_harmonic(B, d, rng);
      const Vector y = eval_harmonic_batch(h, reg.points());
      REQUIRE(reg.value(y) < 1e-20);
      REQUIRE(reg.span_rank() == basis_size(B, d));
    }
}

TEST_CASE("regularizer penalizes an out-of-band tone", "[harmonic][regularizer]") {
  Rng rng(6);
  const auto reg = BandwidthRegularizer::sample(2, 2, 20'000, 1.0, rng);
  Vector y(reg.sample_count());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::cos(2.0 * std::numbers::pi * 3.0 * reg.points()(0, i));
  CHECK(reg.value(y) == Approx(0.5).margin(0.01));
}

TEST_CASE("projection properties", "[harmonic][regularizer][property]") {
  Rng rng(7);
  const auto reg = BandwidthRegularizer::sample(1, 2, 60, 1.0, rng);
  const Matrix P = reg.projection_residual_matrix();
  CHECK((P * P - P).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((P * reg.basis_matrix()).cwiseAbs().maxCoeff() < 1e-12);

  for (int k = 0; k < 20; ++k) {
    Vector y(60);
    for (Eigen::Index i = 0; i < 60; ++i) y[i] = rng.normal();
    REQUIRE((reg.apply_residual(y) - P * y).norm() < 1e-12);
    REQUIRE(reg.value(y) >= 0.0);
    // Gradient is orthogonal to the span.
    REQUIRE((reg.basis_matrix().transpose() * reg.gradient(y)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("regularizer gradient matches finite differences", "[harmonic][regularizer]") {
  Rng rng(8);
  const auto reg = BandwidthRegularizer::sample(1, 1, 30, 1.0, rng);
  Vector y(30);
  for (Eigen::Index i = 0; i < 30; ++i) y[i] = rng.normal();
  const Vector g = reg.gradient(y);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 30; ++i) {
    Vector yp = y, ym = y;
    yp[i] += h;
    ym[i] -= h;
    REQUIRE((reg.value(yp) - reg.value(ym)) / (2 * h) == Approx(g[i]).margin(1e-8));
  }
  CHECK((regularizer_gradient(reg, y) - g).norm() == 0.0);
  CHECK(regularizer_value(reg, y) == reg.value(y));
  REQUIRE_THROWS_AS(reg.value(Vector::Zero(29)), DataError);
}

TEST_CASE("subset residual equals a regularizer built on the subset", "[harmonic][regularizer]") {
  Rng rng(9);
  const auto reg = BandwidthRegularizer::sample(1, 2, 200, 1.0, rng);
  std::vector<Eigen::Index> rows{3, 17, 40, 41, 99, 120, 150, 151, 160, 170, 180, 199};
  Matrix sub(2, static_cast<Eigen::Index>(rows.size()));
  Vector y(sub.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.col(static_cast<Eigen::Index>(i)) = reg.points().col(rows[i]);
    y[static_cast<Eigen::Index>(i)] = rng.normal();
  }
  const BandwidthRegularizer direct(1, 2, sub, 1.0);
  CHECK((reg.apply_residual_on_subset(rows, y) - direct.apply_residual(y)).norm() < 1e-12);

  std::vector<Eigen::Index> bad{0, 200};
  REQUIRE_THROWS_AS(reg.apply_residual_on_subset(bad, Vector::Zero(2)), DataError);
}

TEST_CASE("regularizer with fewer points than basis functions", "[harmonic][regularizer]") {
  Rng rng(10);
  const auto reg = BandwidthRegularizer::sample(2, 2, 10, 1.0, rng);
  CHECK(reg.span_rank() == 10);
  Vector y(10);
  for (Eigen::Index i = 0; i < 10; ++i) y[i] = rng.normal();
  CHECK(reg.value(y) < 1e-20);
  REQUIRE_THROWS_AS(BandwidthRegularizer::sample(1, 2, 0, 1.0, rng), ConfigError);
  REQUIRE_THROWS_AS(BandwidthRegularizer::sample(1, 2, 5, -1.0, rng), ConfigError);
}

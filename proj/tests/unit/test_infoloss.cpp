#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "dcan/error.hpp"
#include "dcan/infoloss.hpp"
#include "oracles.hpp"

using dcan::Matrix;
using dcan::PredictionBatch;

namespace {

Matrix uniform_rows(std::size_t n, std::size_t c) { return Matrix(n, c, 1.0 / c); }

// Directional derivative along e_j − e_k within row i, which keeps the row on
// the simplex.
double tangent_difference(const Matrix& p, std::size_t i, std::size_t j, std::size_t k,
                          const std::function<double(const Matrix&)>& f) {
  const double h = 1e-6;
  Matrix up = p, down = p;
  up(i, j) += h;
  up(i, k) -= h;
  down(i, j) -= h;
  down(i, k) += h;
  return (f(up) - f(down)) / (2 * h);
}

}  // namespace

TEST_CASE("entropy reference values") {
  std::vector<double> one_hot{0, 1, 0};
  CHECK(dcan::entropy(one_hot) == 0.0);
  std::vector<double> uniform4(4, 0.25);
  CHECK(dcan::entropy(uniform4) == doctest::Approx(1.3862943611).epsilon(1e-10));
  std::vector<double> mixed{0.5, 0.25, 0.25};
  CHECK(dcan::entropy(mixed) == doctest::Approx(1.0397207708).epsilon(1e-10));
  std::vector<double> negative{1.2, -0.2};
  CHECK_THROWS_AS(dcan::require_simplex(negative), dcan::Error);
  std::vector<double> short_sum{0.5, 0.4};
  CHECK_THROWS_AS(dcan::require_simplex(short_sum), dcan::Error);
  CHECK_THROWS_AS(PredictionBatch(Matrix{{0.7, 0.7}}), dcan::Error);
}

TEST_CASE("closed-form mutual information values") {
  CHECK(std::abs(dcan::mi_loss(PredictionBatch(uniform_rows(6, 5))).value) <= 1e-12);
  Matrix balanced(6, 3);
  for (std::size_t i = 0; i < 6; ++i) balanced(i, i % 3) = 1.0;
  CHECK(dcan::mi_loss(PredictionBatch(balanced)).value ==
        doctest::Approx(-std::log(3.0)).epsilon(1e-12));
  CHECK(std::abs(dcan::partial_mi_loss(PredictionBatch(uniform_rows(4, 4)), 1.5).value) <= 1e-12);
  auto removed = dcan::partial_mi_loss(PredictionBatch(uniform_rows(4, 8)), 1.5);
  CHECK(std::abs(removed.value - (std::log(8.0) - 1.5)) <= 1e-9);
  CHECK_THROWS_AS(dcan::mi_loss(PredictionBatch(Matrix(0, 3))), dcan::Error);
  CHECK_THROWS_AS(dcan::partial_mi_loss(PredictionBatch(uniform_rows(2, 2)), 0.0), dcan::Error);
}

TEST_CASE("values match a direct evaluation and stay within bounds") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + seed % 9, c = 2 + seed % 6;
    Matrix p = oracle::random_simplex(rng, n, c, 0.5 + (seed % 4));
    const double v = dcan::mi_loss(PredictionBatch(p)).value;
    CHECK(v == doctest::Approx(oracle::mutual_information_loss(p)).epsilon(1e-12));
    CHECK(v <= std::log(double(c)) + 1e-12);
    CHECK(v >= -std::log(double(c)) - 1e-12);
    CHECK(dcan::mi_loss(PredictionBatch(p), false).value ==
          doctest::Approx(oracle::mutual_information_loss(p, false)).epsilon(1e-12));
    CHECK(std::abs(dcan::partial_mi_loss(PredictionBatch(p),
                                         std::numeric_limits<double>::infinity())
                       .value -
                   v) <= 1e-12);
  }
}

TEST_CASE("permutation invariance over rows and columns") {
  std::mt19937_64 rng(9);
  Matrix p = oracle::random_simplex(rng, 7, 4);
  const double base = dcan::mi_loss(PredictionBatch(p)).value;
  Matrix rows(7, 4), cols(7, 4);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      rows(i, j) = p(6 - i, j);
      cols(i, j) = p(i, (j + 1) % 4);
    }
  CHECK(dcan::mi_loss(PredictionBatch(rows)).value == doctest::Approx(base).epsilon(1e-12));
  CHECK(dcan::mi_loss(PredictionBatch(cols)).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gradients match tangent-space finite differences") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 31);
    const std::size_t n = 1 + seed % 6, c = 2 + seed % 4;
    Matrix p = oracle::random_simplex(rng, n, c);
    const bool partial = seed % 2 == 1;
    // Keep clear of the branch switch so the central difference stays on one side.
    double gamma1 = 0.0;
    if (partial) {
      std::vector<double> mean(c, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) mean[j] += p(i, j) / n;
      const double hm = oracle::entropy(mean.data(), c);
      gamma1 = seed % 4 == 1 ? hm + 0.1 : std::max(hm - 0.1, 0.05);
    }
    auto f = [&](const Matrix& q) {
      return partial ? dcan::partial_mi_loss(PredictionBatch(q), gamma1).value
                     : dcan::mi_loss(PredictionBatch(q)).value;
    };
    Matrix g = partial ? dcan::partial_mi_loss(PredictionBatch(p), gamma1).grad
                       : dcan::mi_loss(PredictionBatch(p)).grad;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 1; j < c; ++j) {
        const double analytic = g(i, j) - g(i, 0);
        const double numeric = tangent_difference(p, i, j, 0, f);
        CHECK(oracle::relative_difference(analytic, numeric, 1e-6) <= 1e-6);
      }
  }
}

TEST_CASE("partial loss is continuous across the branch switch") {
  std::mt19937_64 rng(77);
  Matrix p = oracle::random_simplex(rng, 8, 5);
  std::vector<double> mean(5, 0.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 5; ++j) mean[j] += p(i, j) / 8;
  const double hm = oracle::entropy(mean.data(), 5);
  const double eps = 1e-12;
  const double below = dcan::partial_mi_loss(PredictionBatch(p), hm + eps).value;
  const double above = dcan::partial_mi_loss(PredictionBatch(p), hm - eps).value;
  CHECK(std::abs(below - above) <= 1e-9);
  auto at = dcan::partial_mi_loss(PredictionBatch(p), hm);
  auto cond = dcan::mi_loss(PredictionBatch(p), false);
  CHECK(at.grad == cond.grad);
}

#include <cmath>
#include <limits>

#include "doctest.h"
#include "dcan/error.hpp"
#include "dcan/matrix.hpp"
#include "oracles.hpp"

using dcan::Matrix;

TEST_CASE("matrix construction and element access") {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.row(1)[0] == 4);
  CHECK(Matrix(2, 2, 7.0)(1, 1) == 7.0);
  CHECK(Matrix::identity(3)(2, 2) == 1.0);
  CHECK(Matrix::identity(3)(0, 2) == 0.0);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), dcan::Error);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), dcan::Error);
}

TEST_CASE("arithmetic rejects mismatched shapes") {
  Matrix a(2, 3), b(3, 2);
  CHECK_THROWS_AS(a += b, dcan::Error);
  CHECK_THROWS_AS(matmul(a, a), dcan::Error);
  try {
    matmul(a, a);
  } catch (const dcan::Error& e) {
    CHECK(e.kind() == dcan::ErrorKind::shape);
  }
}

TEST_CASE("matmul and transpose agree with the triple loop") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 9);
    const std::size_t r = dim(rng), k = dim(rng), c = dim(rng);
    Matrix a = oracle::random_matrix(rng, r, k), b = oracle::random_matrix(rng, k, c);
    Matrix fast = matmul(a, b), slow = oracle::naive_matmul(a, b);
    for (std::size_t i = 0; i < fast.size(); ++i)
      CHECK(fast.values()[i] == doctest::Approx(slow.values()[i]).epsilon(1e-12));
    CHECK(a.transposed() == oracle::naive_transpose(a));
  }
}

TEST_CASE("trace_product equals the trace of the explicit product") {
  std::mt19937_64 rng(3);
  Matrix a = oracle::random_matrix(rng, 4, 6), b = oracle::random_matrix(rng, 6, 4);
  Matrix p = oracle::naive_matmul(a, b);
  double tr = 0.0;
  for (std::size_t i = 0; i < 4; ++i) tr += p(i, i);
  CHECK(trace_product(a, b) == doctest::Approx(tr).epsilon(1e-12));
  CHECK_THROWS_AS(trace_product(a, a), dcan::Error);
}

TEST_CASE("solve_spd matches the Gauss-Jordan inverse") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 7;
    Matrix r = oracle::random_matrix(rng, n, n);
    Matrix a = oracle::naive_matmul(r, oracle::naive_transpose(r)) + 0.1 * Matrix::identity(n);
    Matrix b = oracle::random_matrix(rng, n, 3);
    Matrix x = solve_spd(a, b);
    Matrix ref = oracle::naive_matmul(oracle::inverse(a), b);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(x.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-8));
  }
}

TEST_CASE("solve_spd reports singular and non-finite systems") {
  Matrix zero(2, 2);
  Matrix rhs = Matrix::identity(2);
  try {
    solve_spd(zero, rhs);
    FAIL("expected a throw");
  } catch (const dcan::Error& e) {
    CHECK(e.kind() == dcan::ErrorKind::singular);
  }
  Matrix indefinite{{1, 2}, {2, 1}};
  CHECK_THROWS_AS(solve_spd(indefinite, rhs), dcan::Error);
  Matrix nan_matrix{{1, 0}, {0, std::numeric_limits<double>::quiet_NaN()}};
  CHECK_THROWS_AS(solve_spd(nan_matrix, rhs), dcan::Error);
  CHECK_THROWS_AS(solve_spd(Matrix(2, 3), rhs), dcan::Error);
}

TEST_CASE("gather_rows, max_abs and all_finite") {
  Matrix m{{1, 2}, {3, -4}, {5, 6}};
  std::vector<std::size_t> idx{2, 0, 2};
  Matrix g = gather_rows(m, idx);
  CHECK(g == Matrix{{5, 6}, {1, 2}, {5, 6}});
  std::vector<std::size_t> bad{3};
  CHECK_THROWS_AS(gather_rows(m, bad), dcan::Error);
  CHECK(max_abs(m) == 6.0);
  CHECK(all_finite(m));
  m(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(m));
}

TEST_CASE("trace reference values and transpose symmetry") {
  CHECK(trace_product(Matrix::identity(3), Matrix::identity(3)) == 3.0);
  CHECK(trace_product(Matrix{{1, 2}, {3, 4}}, Matrix{{5, 6}, {7, 8}}) == 69.0);
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = oracle::random_matrix(rng, 5, 3), b = oracle::random_matrix(rng, 3, 5);
    CHECK(std::abs(trace_product(a, b) - trace_product(b.transposed(), a.transposed())) <= 1e-12);
  }
}

TEST_CASE("matmul is associative up to round-off") {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = oracle::random_matrix(rng, 4, 6), b = oracle::random_matrix(rng, 6, 3),
           c = oracle::random_matrix(rng, 3, 5);
    Matrix left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i)
      CHECK(oracle::relative_difference(left.values()[i], right.values()[i], 1e-12) <= 1e-9);
  }
}

TEST_CASE("solve_spd residual stays small up to condition number 1e6") {
  std::mt19937_64 rng(46);
  for (double cond : {1.0, 1e2, 1e4, 1e6}) {
    // Q·diag(1 .. 1/cond)·Qᵀ with Q from Gram-Schmidt on a random matrix.
    const std::size_t n = 6;
    Matrix q = oracle::random_matrix(rng, n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, j) * q(i, k);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
      for (std::size_t i = 0; i < n; ++i) q(i, j) /= std::sqrt(norm);
    }
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = std::pow(cond, -double(i) / double(n - 1));
    Matrix a = oracle::naive_matmul(oracle::naive_matmul(q, d), oracle::naive_transpose(q));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    Matrix b = oracle::random_matrix(rng, n, 2);
    Matrix residual = oracle::naive_matmul(a, solve_spd(a, b)) - b;
    CHECK(max_abs(residual) < 1e-9);
  }
}

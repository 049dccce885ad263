#include <cmath>

#include "doctest.h"
#include "dcan/error.hpp"
#include "dcan/kernels.hpp"
#include "oracles.hpp"

using dcan::KernelSpec;
using dcan::Matrix;

TEST_CASE("standard kernel spec") {
  KernelSpec spec = KernelSpec::standard();
  CHECK(spec.bandwidths == std::vector<double>{0.1, 1.0, 10.0, 100.0, 1000.0});
  for (double w : spec.weights) CHECK(w == doctest::Approx(0.2));
  CHECK(spec.reg_lambda == 1e-3);
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("kernel spec validation") {
  CHECK_THROWS_AS(KernelSpec::uniform({}).validate(), dcan::Error);
  CHECK_THROWS_AS(KernelSpec::uniform({1.0, -2.0}).validate(), dcan::Error);
  CHECK_THROWS_AS(KernelSpec::uniform({1.0}, 0.0).validate(), dcan::Error);
  KernelSpec uneven = KernelSpec::uniform({1.0, 2.0});
  uneven.weights = {0.3, 0.3};
  CHECK_THROWS_AS(uneven.validate(), dcan::Error);
}

TEST_CASE("kernel entries agree with the scalar formula") {
  std::mt19937_64 rng(21);
  KernelSpec spec = KernelSpec::standard();
  Matrix a = oracle::random_matrix(rng, 6, 3), b = oracle::random_matrix(rng, 4, 3, 2.0);
  Matrix k = gram(a, b, spec);
  REQUIRE(k.rows() == 6);
  REQUIRE(k.cols() == 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double ref = oracle::gaussian_mixture(&a.values()[i * 3], &b.values()[j * 3], 3,
                                                  spec.bandwidths);
      CHECK(k(i, j) == doctest::Approx(ref).epsilon(1e-14));
      CHECK(gaussian_mixture_kernel(a.row(i), b.row(j), spec) == k(i, j));
    }
  CHECK_THROWS_AS(gram(a, Matrix(2, 2), spec), dcan::Error);
}

TEST_CASE("self Gram is symmetric, bounded, unit diagonal and PSD") {
  KernelSpec spec = KernelSpec::standard();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 2 + seed % 9;
    Matrix z = oracle::random_matrix(rng, n, 1 + seed % 4, 0.3 + seed);
    Matrix k = gram(z, z, spec);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(k(i, i) == 1.0);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(k(i, j) == k(j, i));
        CHECK(k(i, j) >= 0.0);
        CHECK(k(i, j) <= 1.0);
      }
    }
    std::normal_distribution<double> dist;
    for (int probe = 0; probe < 50; ++probe) {
      std::vector<double> v(n);
      for (double& x : v) x = dist(rng);
      double q = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) q += v[i] * k(i, j) * v[j];
      CHECK(q >= -1e-10);
    }
  }
}

TEST_CASE("label Gram is the class-agreement indicator") {
  std::mt19937_64 rng(8);
  auto la = oracle::random_labels(rng, 7, 3), lb = oracle::random_labels(rng, 5, 3);
  Matrix ya = dcan::one_hot(la, 3), yb = dcan::one_hot(lb, 3);
  Matrix l = dcan::label_gram(ya, yb);
  Matrix explicit_product = oracle::naive_matmul(ya, oracle::naive_transpose(yb));
  CHECK(l == explicit_product);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(l(i, j) == (la[i] == lb[j] ? 1.0 : 0.0));
}

TEST_CASE("one_hot, argmax and labeled batch checks") {
  std::vector<int> labels{2, 0, 1};
  Matrix y = dcan::one_hot(labels, 3);
  CHECK(dcan::argmax_rows(y) == labels);
  CHECK(dcan::argmax_rows(Matrix{{0.5, 0.5, 0.0}}) == std::vector<int>{0});
  std::vector<int> bad{3};
  CHECK_THROWS_AS(dcan::one_hot(bad, 3), dcan::Error);
  dcan::LabeledBatch ok{Matrix(3, 2), y};
  CHECK_NOTHROW(ok.validate());
  dcan::LabeledBatch soft{Matrix(1, 2), Matrix{{0.5, 0.5}}};
  CHECK_THROWS_AS(soft.validate(), dcan::Error);
  dcan::LabeledBatch ragged{Matrix(2, 2), y};
  CHECK_THROWS_AS(ragged.validate(), dcan::Error);
}

TEST_CASE("gram_gradient matches finite differences") {
  KernelSpec spec = KernelSpec::uniform({0.5, 1.0, 3.0});
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const std::size_t n = 1 + seed % 5, m = 1 + seed % 4, d = 1 + seed % 3;
    Matrix a = oracle::random_matrix(rng, n, d), b = oracle::random_matrix(rng, m, d);
    Matrix coeff = oracle::random_matrix(rng, n, m);
    auto weighted = [&](const Matrix& x) {
      Matrix k = gram(x, b, spec);
      double s = 0.0;
      for (std::size_t i = 0; i < k.size(); ++i) s += coeff.values()[i] * k.values()[i];
      return s;
    };
    Matrix g = gram_gradient(a, b, spec, coeff);
    for (std::size_t i = 0; i < a.size(); ++i) {
      Matrix plus = a, minus = a;
      plus.values()[i] += h;
      minus.values()[i] -= h;
      const double numeric = (weighted(plus) - weighted(minus)) / (2 * h);
      CHECK(oracle::relative_difference(g.values()[i], numeric, 1e-6) <= 1e-6);
    }
  }
}

#pragma once

#include <span>
#include <vector>

#include "dcan/matrix.hpp"

namespace dcan {

// Mixture of Gaussian kernels k(x,y) = Σ w_m exp(-‖x-y‖² / (2σ_m²)), plus the
// ridge λ added to the label Gram matrix when forming conditional embeddings.
struct KernelSpec {
  std::vector<double> bandwidths;
  std::vector<double> weights;
  double reg_lambda = 1e-3;

  // Equal weights over `bandwidths`.
  static KernelSpec uniform(std::vector<double> bandwidths, double reg_lambda = 1e-3);
  // Five bandwidths {0.1, 1, 10, 100, 1000}, equal weights, λ = 1e-3.
  static KernelSpec standard();

  // Throws ErrorKind::config on a violated invariant.
  void validate() const;
};

// Features z (n×d) with one-hot labels y (n×c).
struct LabeledBatch {
  Matrix z;
  Matrix y;

  std::size_t size() const noexcept { return z.rows(); }
  void validate() const;
};

Matrix one_hot(std::span<const int> labels, std::size_t class_count);

// Row-wise argmax; ties go to the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

double gaussian_mixture_kernel(std::span<const double> x, std::span<const double> y,
                               const KernelSpec& spec);

Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec);

// Linear kernel on one-hot rows: 1 where classes agree, 0 elsewhere.
Matrix label_gram(const Matrix& ya, const Matrix& yb);

// ∂/∂a of Σ_ij coeff_ij · k(a_i, b_j). Only the first argument is
// differentiated, so for gram(a, a) pass coeff + coeffᵀ.
Matrix gram_gradient(const Matrix& a, const Matrix& b, const KernelSpec& spec,
                     const Matrix& coeff);

}  // namespace dcan

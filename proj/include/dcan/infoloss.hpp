#pragma once

#include <span>

#include "dcan/matrix.hpp"

namespace dcan {

// Probabilities below this are floored inside logarithms.
inline constexpr double kProbFloor = 1e-12;

// n × c matrix of predicted class distributions; rows validated on the simplex.
class PredictionBatch {
 public:
  explicit PredictionBatch(Matrix probs);

  const Matrix& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.rows(); }
  std::size_t class_count() const noexcept { return probs_.cols(); }

 private:
  Matrix probs_;
};

// Throws ErrorKind::domain unless every row is nonnegative and sums to 1 ± 1e-9.
void require_simplex(std::span<const double> p);

// Shannon entropy in nats, 0·ln 0 = 0.
double entropy(std::span<const double> p);

struct LossAndGrad {
  double value = 0.0;
  Matrix grad;  // ∂value/∂probs, same shape as the probabilities
};

// (1/n)Σ H(p_i) − H(p̄). With `include_marginal` false only the conditional
// entropy term remains.
LossAndGrad mi_loss(const PredictionBatch& batch, bool include_marginal = true);

// (1/n)Σ H(p_i) − min{H(p̄), γ₁}. The marginal term is dropped once H(p̄) ≥ γ₁.
LossAndGrad partial_mi_loss(const PredictionBatch& batch, double gamma1);

}  // namespace dcan

#include "dcan/infoloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcan/error.hpp"

namespace dcan {

namespace {

double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

double entropy_unchecked(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * floored_log(v);
  return h;
}

struct MiTerms {
  double conditional = 0.0;
  double marginal = 0.0;
  std::vector<double> mean;
};

MiTerms mi_terms(const Matrix& probs) {
  const std::size_t n = probs.rows();
  MiTerms t;
  t.mean.assign(probs.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = probs.row(i);
    t.conditional += entropy_unchecked(r);
    for (std::size_t j = 0; j < r.size(); ++j) t.mean[j] += r[j];
  }
  t.conditional /= static_cast<double>(n);
  for (double& m : t.mean) m /= static_cast<double>(n);
  t.marginal = entropy_unchecked(t.mean);
  return t;
}

LossAndGrad assemble(const Matrix& probs, const MiTerms& t, bool with_marginal) {
  const std::size_t n = probs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossAndGrad out;
  out.value = with_marginal ? t.conditional - t.marginal : t.conditional;
  out.grad = Matrix(n, probs.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      double g = -(floored_log(probs(i, j)) + 1.0);
      if (with_marginal) g += floored_log(t.mean[j]) + 1.0;
      out.grad(i, j) = g * inv_n;
    }
  }
  return out;
}

void require_nonempty(const PredictionBatch& batch) {
  if (batch.size() == 0) fail(ErrorKind::domain, "mutual information: empty batch");
}

}  // namespace

void require_simplex(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorKind::domain, "probability entry " + std::to_string(v) + " is not in [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::domain, "probabilities sum to " + std::to_string(sum) + ", not 1");
}

PredictionBatch::PredictionBatch(Matrix probs) : probs_(std::move(probs)) {
  for (std::size_t i = 0; i < probs_.rows(); ++i) require_simplex(probs_.row(i));
}

double entropy(std::span<const double> p) {
  require_simplex(p);
  return entropy_unchecked(p);
}

LossAndGrad mi_loss(const PredictionBatch& batch, bool include_marginal) {
  require_nonempty(batch);
  return assemble(batch.probs(), mi_terms(batch.probs()), include_marginal);
}

LossAndGrad partial_mi_loss(const PredictionBatch& batch, double gamma1) {
  if (!(gamma1 > 0.0)) fail(ErrorKind::domain, "partial_mi_loss: gamma1 must be > 0");
  require_nonempty(batch);
  const MiTerms t = mi_terms(batch.probs());
  if (t.marginal < gamma1) return assemble(batch.probs(), t, true);
  LossAndGrad out = assemble(batch.probs(), t, false);
  out.value -= gamma1;
  return out;
}

}  // namespace dcan

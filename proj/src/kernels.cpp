#include "dcan/kernels.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dcan/error.hpp"

namespace dcan {

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    d2 += diff * diff;
  }
  return d2;
}

// Per-bandwidth precomputation: w_m and 1/(2σ_m²).
struct Mixture {
  std::vector<double> weight;
  std::vector<double> inv_two_var;
  std::vector<double> inv_var;

  explicit Mixture(const KernelSpec& spec) {
    for (std::size_t m = 0; m < spec.bandwidths.size(); ++m) {
      const double var = spec.bandwidths[m] * spec.bandwidths[m];
      weight.push_back(spec.weights[m]);
      inv_two_var.push_back(0.5 / var);
      inv_var.push_back(1.0 / var);
    }
  }

  double value(double d2) const {
    double k = 0.0;
    for (std::size_t m = 0; m < weight.size(); ++m)
      k += weight[m] * std::exp(-d2 * inv_two_var[m]);
    return k;
  }

  // Σ_m w_m exp(-d²/(2σ²))/σ², the scalar in front of (b - a) in ∂k/∂a.
  double slope(double d2) const {
    double s = 0.0;
    for (std::size_t m = 0; m < weight.size(); ++m)
      s += weight[m] * std::exp(-d2 * inv_two_var[m]) * inv_var[m];
    return s;
  }
};

}  // namespace

KernelSpec KernelSpec::uniform(std::vector<double> bandwidths, double reg_lambda) {
  KernelSpec spec;
  const double w = bandwidths.empty() ? 0.0 : 1.0 / static_cast<double>(bandwidths.size());
  spec.weights.assign(bandwidths.size(), w);
  spec.bandwidths = std::move(bandwidths);
  spec.reg_lambda = reg_lambda;
  return spec;
}

KernelSpec KernelSpec::standard() { return uniform({0.1, 1.0, 10.0, 100.0, 1000.0}, 1e-3); }

void KernelSpec::validate() const {
  if (bandwidths.empty()) fail(ErrorKind::config, "kernel: no bandwidths");
  if (weights.size() != bandwidths.size())
    fail(ErrorKind::config, "kernel: weights and bandwidths differ in length");
  for (double s : bandwidths)
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorKind::config, "kernel: bandwidth must be > 0");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorKind::config, "kernel: weight must be > 0");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::config, "kernel: weights must sum to 1");
  if (!(reg_lambda > 0.0) || !std::isfinite(reg_lambda))
    fail(ErrorKind::config, "kernel: reg_lambda must be > 0");
}

void LabeledBatch::validate() const {
  if (z.rows() != y.rows())
    fail(ErrorKind::shape, "LabeledBatch: " + std::to_string(z.rows()) + " features vs " +
                               std::to_string(y.rows()) + " labels");
  for (std::size_t i = 0; i < y.rows(); ++i) {
    int ones = 0;
    for (double v : y.row(i)) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1)
      fail(ErrorKind::domain, "LabeledBatch: row " + std::to_string(i) + " is not one-hot");
  }
}

Matrix one_hot(std::span<const int> labels, std::size_t class_count) {
  Matrix y(labels.size(), class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= class_count)
      fail(ErrorKind::domain, "one_hot: label " + std::to_string(c) + " out of range");
    y(i, static_cast<std::size_t>(c)) = 1.0;
  }
  return y;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] > r[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double gaussian_mixture_kernel(std::span<const double> x, std::span<const double> y,
                               const KernelSpec& spec) {
  if (x.size() != y.size())
    fail(ErrorKind::shape, "gaussian_mixture_kernel: dimension " + std::to_string(x.size()) +
                               " vs " + std::to_string(y.size()));
  return Mixture(spec).value(squared_distance(x, y));
}

Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  if (a.cols() != b.cols()) fail(ErrorKind::shape, "gram: feature dimensions differ");
  const Mixture mix(spec);
  Matrix g(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      g(i, j) = mix.value(squared_distance(a.row(i), b.row(j)));
  return g;
}

Matrix label_gram(const Matrix& ya, const Matrix& yb) {
  if (ya.cols() != yb.cols()) fail(ErrorKind::shape, "label_gram: class counts differ");
  const auto ca = argmax_rows(ya);
  const auto cb = argmax_rows(yb);
  Matrix l(ya.rows(), yb.rows());
  for (std::size_t i = 0; i < ca.size(); ++i)
    for (std::size_t j = 0; j < cb.size(); ++j) l(i, j) = ca[i] == cb[j] ? 1.0 : 0.0;
  return l;
}

Matrix gram_gradient(const Matrix& a, const Matrix& b, const KernelSpec& spec,
                     const Matrix& coeff) {
  if (a.cols() != b.cols()) fail(ErrorKind::shape, "gram_gradient: feature dimensions differ");
  if (coeff.rows() != a.rows() || coeff.cols() != b.rows())
    fail(ErrorKind::shape, "gram_gradient: coefficient shape does not match Gram shape");
  const Mixture mix(spec);
  const std::size_t d = a.cols();
  Matrix grad(a.rows(), d);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto gi = grad.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double c = coeff(i, j);
      if (c == 0.0) continue;
      auto bj = b.row(j);
      const double s = c * mix.slope(squared_distance(ai, bj));
      for (std::size_t k = 0; k < d; ++k) gi[k] += s * (bj[k] - ai[k]);
    }
  }
  return grad;
}

}  // namespace dcan

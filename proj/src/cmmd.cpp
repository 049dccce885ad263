#include "dcan/cmmd.hpp"

#include <cmath>
#include <vector>

#include "dcan/error.hpp"

namespace dcan {

namespace {

// With one-hot labels L = YYᵀ and YᵀY = diag(m) holds the class counts, so
// (L + λI)⁻¹Y = Y·diag(1/(m + λ)). Every weight matrix is then Y_a·diag(d)·Y_bᵀ,
// which avoids solving against L + λI (condition number about n/λ).
std::vector<double> inverse_shifted_counts(const Matrix& y, double reg_lambda) {
  std::vector<double> counts(y.cols(), 0.0);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < y.cols(); ++k) {
      const double v = y(i, k);
      if (v == 1.0) {
        counts[k] += 1.0;
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1)
      fail(ErrorKind::domain, "cmmd: label row " + std::to_string(i) + " is not one-hot");
  }
  for (double& c : counts) c = 1.0 / (c + reg_lambda);
  return counts;
}

// ya·diag(d)·ybᵀ for one-hot rows: entry (i, j) is d_k when both rows have class k.
Matrix class_weighted(const Matrix& ya, const Matrix& yb, const std::vector<double>& d) {
  const auto ca = argmax_rows(ya);
  const auto cb = argmax_rows(yb);
  Matrix out(ya.rows(), yb.rows());
  for (std::size_t i = 0; i < ca.size(); ++i)
    for (std::size_t j = 0; j < cb.size(); ++j)
      if (ca[i] == cb[j]) out(i, j) = d[static_cast<std::size_t>(ca[i])];
  return out;
}

}  // namespace

CmmdWeights cmmd_weights(const Matrix& ys, const Matrix& yt, double reg_lambda) {
  if (ys.cols() != yt.cols())
    fail(ErrorKind::shape, "cmmd: class counts differ (" + std::to_string(ys.cols()) + " vs " +
                               std::to_string(yt.cols()) + ")");
  if (!(reg_lambda > 0.0)) fail(ErrorKind::config, "cmmd: reg_lambda must be > 0");
  const auto inv_s = inverse_shifted_counts(ys, reg_lambda);
  const auto inv_t = inverse_shifted_counts(yt, reg_lambda);
  std::vector<double> d_s(inv_s.size()), d_t(inv_s.size()), d_ts(inv_s.size());
  for (std::size_t k = 0; k < inv_s.size(); ++k) {
    d_s[k] = inv_s[k] * inv_s[k];
    d_t[k] = inv_t[k] * inv_t[k];
    d_ts[k] = inv_t[k] * inv_s[k];
  }
  return CmmdWeights{
      .g_s = class_weighted(ys, ys, d_s),
      .g_t = class_weighted(yt, yt, d_t),
      .g_ts = class_weighted(yt, ys, d_ts),
  };
}

double cmmd_from_grams(const CmmdWeights& w, const Matrix& k_s, const Matrix& k_t,
                       const Matrix& k_st) {
  return trace_product(w.g_s, k_s) + trace_product(w.g_t, k_t) -
         2.0 * trace_product(w.g_ts, k_st);
}

CmmdResult cmmd_loss(const LabeledBatch& source, const LabeledBatch& target,
                     const KernelSpec& spec) {
  source.validate();
  target.validate();
  if (source.y.cols() != target.y.cols())
    fail(ErrorKind::shape, "cmmd: class counts differ");
  if (source.z.cols() != target.z.cols())
    fail(ErrorKind::shape, "cmmd: feature dimensions differ");

  CmmdResult r;
  r.grad_zs = Matrix(source.z.rows(), source.z.cols());
  r.grad_zt = Matrix(target.z.rows(), target.z.cols());
  if (source.size() == 0 || target.size() == 0) return r;

  CmmdWeights w = cmmd_weights(source.y, target.y, spec.reg_lambda);
  const Matrix k_s = gram(source.z, source.z, spec);
  const Matrix k_t = gram(target.z, target.z, spec);
  const Matrix k_st = gram(source.z, target.z, spec);
  r.value = cmmd_from_grams(w, k_s, k_t, k_st);

  // Tr(G K) = Σ_ij G_ji K_ij, so K's coefficient matrix is Gᵀ; the within-domain
  // Gram matrices depend on z through both arguments.
  const Matrix gts_t = w.g_ts.transposed();
  r.grad_zs = gram_gradient(source.z, source.z, spec, w.g_s + w.g_s.transposed());
  r.grad_zs -= 2.0 * gram_gradient(source.z, target.z, spec, gts_t);
  r.grad_zt = gram_gradient(target.z, target.z, spec, w.g_t + w.g_t.transposed());
  r.grad_zt -= 2.0 * gram_gradient(target.z, source.z, spec, w.g_ts);

  if (!std::isfinite(r.value) || !all_finite(r.grad_zs) || !all_finite(r.grad_zt))
    fail(ErrorKind::numeric, "cmmd: non-finite loss or gradient");
  r.g_s = std::move(w.g_s);
  r.g_t = std::move(w.g_t);
  r.g_ts = std::move(w.g_ts);
  return r;
}

}  // namespace dcan

#include "dcan/pseudo.hpp"

#include <cmath>

#include "dcan/error.hpp"
#include "dcan/kernels.hpp"

namespace dcan {

PseudoLabels select_pseudo_labels(const PredictionBatch& probs, double gamma0) {
  if (!(gamma0 > 0.0) || std::isnan(gamma0))
    fail(ErrorKind::domain, "select_pseudo_labels: gamma0 must be > 0");
  const Matrix& p = probs.probs();
  const auto top = argmax_rows(p);
  PseudoLabels out;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    if (p(i, static_cast<std::size_t>(top[i])) > gamma0) {
      out.indices.push_back(i);
      out.classes.push_back(top[i]);
    }
  }
  out.labels = one_hot(out.classes, p.cols());
  return out;
}

}  // namespace dcan

#pragma once

#include <vector>

#include "dcan/infoloss.hpp"
#include "dcan/matrix.hpp"

namespace dcan {

struct PseudoLabels {
  std::vector<std::size_t> indices;  // selected rows, ascending
  std::vector<int> classes;          // argmax class per selected row
  Matrix labels;                     // one-hot, |indices| × class_count
};

// Rows whose top probability is strictly greater than gamma0, labeled by their
// argmax (lowest index on ties). gamma0 >= 1 selects nothing.
PseudoLabels select_pseudo_labels(const PredictionBatch& probs, double gamma0);

}  // namespace dcan

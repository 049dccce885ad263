#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dcan/datasets.hpp"
#include "dcan/kernels.hpp"
#include "dcan/model.hpp"
#include "dcan/pseudo.hpp"

namespace dcan {

enum class AdaptMode { uda, partial };

struct Ablation {
  bool no_cmmd = false;
  bool no_marginal_entropy = false;
};

struct TrainConfig {
  double lambda0 = 0.1;   // CMMD weight
  double lambda1 = 0.2;   // mutual-information weight
  double gamma0 = 0.95;   // pseudo-label confidence threshold
  double gamma1 = 1.5;    // marginal-entropy cap (partial mode)
  double reg_lambda = 1e-3;
  std::size_t batch_n = 32;
  std::size_t pretrain_epochs = 20;
  std::size_t adapt_steps = 2000;
  double lr_feature = 2e-4;
  double lr_classifier = 2e-4;
  std::uint64_t seed = 0;
  AdaptMode mode = AdaptMode::uda;
  Ablation ablation;
  std::vector<std::size_t> hidden{64, 64};
  std::vector<double> bandwidths{0.1, 1.0, 10.0, 100.0, 1000.0};
  // Evaluation-only oracle: CMMD uses true target labels instead of pseudo-labels.
  bool target_labels_in_cmmd = false;
  // Stop once the 100-step moving average of loss_total moves by < 1e-5.
  bool early_stop = false;
  std::size_t log_interval = 10;

  void validate() const;
  KernelSpec kernel() const;
  LearningRates learning_rates() const;
};

struct StepMetrics {
  std::size_t step = 0;
  double loss_sc = 0.0;
  double loss_cmmd = 0.0;
  double loss_mi = 0.0;
  double loss_total = 0.0;
  std::size_t pseudo_count = 0;
  std::optional<double> pseudo_accuracy;  // against held-out truth, if known
  std::optional<double> target_accuracy;  // filled on logging steps
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::optional<double>> per_class_accuracy;  // empty classes: nullopt
  std::vector<std::vector<std::size_t>> confusion;       // [true][predicted]
  std::vector<double> prediction_share;                  // fraction predicted per class
  std::size_t evaluated = 0;
};

// Labeled rows only contribute to accuracy and the confusion matrix;
// prediction_share uses all rows.
Evaluation evaluate(const MlpModel& model, const DomainDataset& ds);

// Rows of a dataset drawn for one step. Target labels are carried for
// evaluation and the ground-truth oracle mode only.
struct DomainBatch {
  Matrix x;
  std::vector<int> labels;
};

DomainBatch draw_batch(const DomainDataset& ds, std::span<const std::size_t> indices);

struct ObjectiveEvaluation {
  double loss_sc = 0.0;
  double loss_cmmd = 0.0;
  double loss_mi = 0.0;
  double loss_total = 0.0;
  PseudoLabels pseudo;
  ParamGrads grads;
};

// Objective L_SC + λ₀·L_CMMD + λ₁·L_MI (or its partial variant) and its
// parameter gradient. Target labels for CMMD come from `frozen_labels` when
// given, otherwise from thresholding the current predictions.
ObjectiveEvaluation evaluate_objective(const MlpModel& model, const DomainBatch& source,
                                       const Matrix& target_x, const TrainConfig& cfg,
                                       const PseudoLabels* frozen_labels = nullptr);

// One cross-entropy-only update on a source batch.
double source_step(MlpModel& model, AdamState& adam, const DomainBatch& source,
                   LearningRates lr);

void pretrain(MlpModel& model, const DomainDataset& source, const TrainConfig& cfg);

StepMetrics adapt_step(MlpModel& model, AdamState& adam, const DomainBatch& source,
                       const DomainBatch& target, const TrainConfig& cfg, std::size_t step);

struct TrainResult {
  MlpModel model;
  std::vector<StepMetrics> log;  // logging steps only
  Evaluation pretrain_target;
  Evaluation final_target;
  Evaluation final_source;
  std::size_t steps_run = 0;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

TrainResult train(const DomainDataset& source, const DomainDataset& target,
                  const TrainConfig& cfg, const MetricsSink& sink = {});

// Independent 64-bit seed for a named stream of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dcan

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcan/datasets.hpp"
#include "dcan/trainer.hpp"

namespace dcan {

struct DatasetConfig {
  enum class Kind { clusters, csv };
  Kind kind = Kind::clusters;
  ClusterTaskSpec clusters = default_clusters();
  std::optional<std::uint64_t> seed;  // defaults to the training seed
  std::filesystem::path source_csv;
  std::filesystem::path target_csv;
  std::size_t csv_classes = 0;  // 0: infer from labels
  std::optional<std::size_t> keep_classes;

  // The calibrated rotated-clusters task used when no dataset is given.
  static ClusterTaskSpec default_clusters();
};

struct ExperimentConfig {
  TrainConfig train;
  DatasetConfig dataset;

  // Missing keys take defaults; unknown keys and wrong types raise
  // ErrorKind::config naming the key.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  // Fully resolved configuration, every field present.
  nlohmann::json to_json() const;
};

DomainPair build_domains(const ExperimentConfig& cfg);

nlohmann::json metrics_to_json(const StepMetrics& m);
nlohmann::json evaluation_to_json(const Evaluation& ev);

struct RunSummary {
  double target_accuracy = 0.0;
  double pretrain_target_accuracy = 0.0;
  nlohmann::json summary;
};

// Trains and writes config-echo.json, metrics.jsonl, summary.json, model.ckpt
// and embeddings.csv into out_dir.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Feature rows for the full source and target sets: f0..f{d-1}, domain,
// label, predicted.
void dump_embeddings(const ExperimentConfig& cfg, const MlpModel& model,
                     const std::filesystem::path& out_csv);

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"batch_n", "keep_classes", "gamma0", "lambda0",
                                             "lambda1"};
  return axes;
}

ExperimentConfig with_axis_value(ExperimentConfig cfg, const std::string& axis, double value);

// One run per value under out_dir/<axis>-<index>/; failures are recorded and
// the sweep continues. Writes sweep.json and sweep.csv; returns the table.
nlohmann::json run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                         const std::vector<double>& values, const std::filesystem::path& out_dir);

}  // namespace dcan

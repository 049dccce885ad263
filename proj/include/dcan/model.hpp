#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dcan/infoloss.hpp"
#include "dcan/matrix.hpp"

namespace dcan {

enum class Activation { relu, identity };

// y = act(x·W + b) with W stored in×out.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation activation = Activation::relu;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
};

// Fully-connected feature extractor followed by a linear softmax classifier.
// The extractor output is the feature space the alignment loss acts on.
struct MlpModel {
  std::vector<DenseLayer> layers;
  DenseLayer classifier{.weight = {}, .bias = {}, .activation = Activation::identity};

  // Glorot-uniform weights, zero biases, ReLU hidden layers.
  static MlpModel initialize(std::size_t input_dim, std::span<const std::size_t> hidden,
                             std::size_t class_count, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  std::size_t class_count() const noexcept { return classifier.out_dim(); }
  std::size_t parameter_count() const;

  void validate() const;
};

// Parameters in a fixed order: each extractor layer (weights row-major, then
// bias), then the classifier.
std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, std::span<const double> values);

struct ForwardTrace {
  std::vector<Matrix> layer_inputs;     // input to each extractor layer
  std::vector<Matrix> pre_activations;  // x·W + b per extractor layer
  Matrix features;
  Matrix logits;
  PredictionBatch probs{Matrix{}};
};

ForwardTrace forward(const MlpModel& model, const Matrix& x);

// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

// (1/n)Σ −ln p_{i,y_i}; gradient with respect to the probabilities.
LossAndGrad cross_entropy(const PredictionBatch& probs, const Matrix& labels);

struct LayerGrads {
  Matrix weight;
  std::vector<double> bias;
};

struct ParamGrads {
  std::vector<LayerGrads> layers;
  LayerGrads classifier;

  static ParamGrads zeros_like(const MlpModel& model);
  ParamGrads& operator+=(const ParamGrads& other);
  std::vector<double> flatten() const;
};

// Backpropagates an upstream gradient on the probabilities and one injected
// directly at the feature layer. An empty matrix stands for a zero gradient.
ParamGrads backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& grad_probs,
                    const Matrix& grad_features);

struct AdamState {
  ParamGrads first_moment;
  ParamGrads second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const MlpModel& model);
};

struct LearningRates {
  double feature = 2e-4;
  double classifier = 2e-4;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(MlpModel& model, const ParamGrads& grads, AdamState& state, LearningRates lr,
               AdamHyper hyper = {});

// JSON container; doubles are written with round-trip precision.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const MlpModel& model);
MlpModel checkpoint_from_string(const std::string& text);

}  // namespace dcan

#include "dcan/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dcan/error.hpp"

namespace dcan {

namespace {

using nlohmann::json;

void add_bias(Matrix& m, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) s[j] += r[j];
  }
  return s;
}

// aᵀ·b without materializing the transpose.
Matrix transpose_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ar = a.row(k);
    auto br = b.row(k);
    for (std::size_t i = 0; i < ar.size(); ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      auto cr = c.row(i);
      for (std::size_t j = 0; j < br.size(); ++j) cr[j] += aki * br[j];
    }
  }
  return c;
}

// a·bᵀ.
Matrix matmul_transpose(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix apply_layer(const DenseLayer& layer, const Matrix& x) {
  Matrix pre = matmul(x, layer.weight);
  add_bias(pre, layer.bias);
  return pre;
}

Matrix activate(const Matrix& pre, Activation act) {
  if (act == Activation::identity) return pre;
  Matrix out = pre;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

LayerGrads zero_grads(const DenseLayer& layer) {
  return {Matrix(layer.in_dim(), layer.out_dim()), std::vector<double>(layer.out_dim(), 0.0)};
}

void add_into(LayerGrads& a, const LayerGrads& b) {
  a.weight += b.weight;
  for (std::size_t j = 0; j < a.bias.size(); ++j) a.bias[j] += b.bias[j];
}

void append(std::vector<double>& out, const Matrix& w, const std::vector<double>& b) {
  out.insert(out.end(), w.values().begin(), w.values().end());
  out.insert(out.end(), b.begin(), b.end());
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, double lr, double c1, double c2, const AdamHyper& h) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
    v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
    const double m_hat = m[k] / c1;
    const double v_hat = v[k] / c2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

void adam_layer(DenseLayer& layer, const LayerGrads& g, LayerGrads& m, LayerGrads& v, double lr,
                double c1, double c2, const AdamHyper& h) {
  adam_update(layer.weight.values(), g.weight.values(), m.weight.values(), v.weight.values(), lr,
              c1, c2, h);
  adam_update(layer.bias, g.bias, m.bias, v.bias, lr, c1, c2, h);
}

void require_grad_shape(const LayerGrads& g, const DenseLayer& layer) {
  if (g.weight.rows() != layer.in_dim() || g.weight.cols() != layer.out_dim() ||
      g.bias.size() != layer.out_dim())
    fail(ErrorKind::shape, "adam_step: gradient shape does not match model");
}

json layer_to_json(const DenseLayer& layer) {
  return json{{"in", layer.in_dim()},
              {"out", layer.out_dim()},
              {"activation", layer.activation == Activation::relu ? "relu" : "identity"},
              {"weight", std::vector<double>(layer.weight.values().begin(),
                                             layer.weight.values().end())},
              {"bias", layer.bias}};
}

DenseLayer layer_from_json(const json& j) {
  const auto in = j.at("in").get<std::size_t>();
  const auto out = j.at("out").get<std::size_t>();
  const auto act = j.at("activation").get<std::string>();
  if (act != "relu" && act != "identity")
    fail(ErrorKind::data, "checkpoint: unknown activation '" + act + "'");
  auto weight = j.at("weight").get<std::vector<double>>();
  if (weight.size() != in * out) fail(ErrorKind::data, "checkpoint: weight length mismatch");
  DenseLayer layer{Matrix(in, out, std::move(weight)), j.at("bias").get<std::vector<double>>(),
                   act == "relu" ? Activation::relu : Activation::identity};
  if (layer.bias.size() != out) fail(ErrorKind::data, "checkpoint: bias length mismatch");
  return layer;
}

constexpr const char* kCheckpointFormat = "dcan-mlp";
constexpr int kCheckpointVersion = 1;

}  // namespace

MlpModel MlpModel::initialize(std::size_t input_dim, std::span<const std::size_t> hidden,
                              std::size_t class_count, std::uint64_t seed) {
  if (input_dim == 0 || class_count < 2)
    fail(ErrorKind::config, "model: input_dim must be >= 1 and class_count >= 2");
  std::mt19937_64 rng(seed);
  auto make = [&rng](std::size_t in, std::size_t out, Activation act) {
    if (out == 0) fail(ErrorKind::config, "model: layer width must be >= 1");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(in, out), std::vector<double>(out, 0.0), act};
    for (double& w : layer.weight.values()) w = dist(rng);
    return layer;
  };
  MlpModel model;
  std::size_t prev = input_dim;
  for (std::size_t width : hidden) {
    model.layers.push_back(make(prev, width, Activation::relu));
    prev = width;
  }
  model.classifier = make(prev, class_count, Activation::identity);
  return model;
}

std::size_t MlpModel::input_dim() const {
  return layers.empty() ? classifier.in_dim() : layers.front().in_dim();
}

std::size_t MlpModel::feature_dim() const { return classifier.in_dim(); }

std::size_t MlpModel::parameter_count() const {
  std::size_t n = classifier.weight.size() + classifier.bias.size();
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpModel::validate() const {
  std::size_t prev = input_dim();
  for (const auto& l : layers) {
    if (l.in_dim() != prev || l.bias.size() != l.out_dim())
      fail(ErrorKind::shape, "model: layer dimensions do not chain");
    prev = l.out_dim();
  }
  if (classifier.in_dim() != prev || classifier.bias.size() != classifier.out_dim())
    fail(ErrorKind::shape, "model: classifier does not match feature dimension");
  if (classifier.out_dim() < 2) fail(ErrorKind::shape, "model: need at least two classes");
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for (const auto& l : model.layers) append(out, l.weight, l.bias);
  append(out, model.classifier.weight, model.classifier.bias);
  return out;
}

void assign_parameters(MlpModel& model, std::span<const double> values) {
  if (values.size() != model.parameter_count())
    fail(ErrorKind::shape, "assign_parameters: wrong parameter count");
  std::size_t pos = 0;
  auto take = [&](std::span<double> dst) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
    pos += dst.size();
  };
  for (auto& l : model.layers) {
    take(l.weight.values());
    take(l.bias);
  }
  take(model.classifier.weight.values());
  take(model.classifier.bias);
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    auto out = p.row(i);
    const double mx = *std::ranges::max_element(z);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      out[j] = std::exp(z[j] - mx);
      sum += out[j];
    }
    for (double& v : out) v /= sum;
  }
  return p;
}

ForwardTrace forward(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim())
    fail(ErrorKind::shape, "forward: input has " + std::to_string(x.cols()) +
                               " columns, model expects " + std::to_string(model.input_dim()));
  ForwardTrace trace;
  Matrix h = x;
  for (const auto& layer : model.layers) {
    Matrix pre = apply_layer(layer, h);
    Matrix next = activate(pre, layer.activation);
    trace.layer_inputs.push_back(std::move(h));
    trace.pre_activations.push_back(std::move(pre));
    h = std::move(next);
  }
  trace.logits = apply_layer(model.classifier, h);
  trace.features = std::move(h);
  trace.probs = PredictionBatch(softmax(trace.logits));
  return trace;
}

LossAndGrad cross_entropy(const PredictionBatch& probs, const Matrix& labels) {
  const Matrix& p = probs.probs();
  if (p.rows() != labels.rows() || p.cols() != labels.cols())
    fail(ErrorKind::shape, "cross_entropy: probabilities and labels differ in shape");
  if (p.rows() == 0) fail(ErrorKind::domain, "cross_entropy: empty batch");
  const double inv_n = 1.0 / static_cast<double>(p.rows());
  LossAndGrad out;
  out.grad = Matrix(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double y = labels(i, j);
      if (y == 0.0) continue;
      const double q = std::max(p(i, j), kProbFloor);
      out.value -= y * std::log(q) * inv_n;
      out.grad(i, j) = -y / q * inv_n;
    }
  }
  return out;
}

ParamGrads ParamGrads::zeros_like(const MlpModel& model) {
  ParamGrads g;
  for (const auto& l : model.layers) g.layers.push_back(zero_grads(l));
  g.classifier = zero_grads(model.classifier);
  return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (other.layers.size() != layers.size())
    fail(ErrorKind::shape, "ParamGrads: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) add_into(layers[l], other.layers[l]);
  add_into(classifier, other.classifier);
  return *this;
}

std::vector<double> ParamGrads::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) append(out, l.weight, l.bias);
  append(out, classifier.weight, classifier.bias);
  return out;
}

ParamGrads backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& grad_probs,
                    const Matrix& grad_features) {
  const Matrix& p = trace.probs.probs();
  const std::size_t n = p.rows();
  const bool has_probs = !grad_probs.empty();
  const bool has_features = !grad_features.empty();
  if (has_probs && (grad_probs.rows() != n || grad_probs.cols() != p.cols()))
    fail(ErrorKind::shape, "backward: grad_probs shape does not match trace");
  if (has_features && (grad_features.rows() != trace.features.rows() ||
                       grad_features.cols() != trace.features.cols()))
    fail(ErrorKind::shape, "backward: grad_features shape does not match trace");
  if (trace.layer_inputs.size() != model.layers.size())
    fail(ErrorKind::shape, "backward: trace was produced by a different model");

  ParamGrads grads = ParamGrads::zeros_like(model);

  // Softmax Jacobian: ∂/∂z_ij = p_ij (g_ij − Σ_k p_ik g_ik).
  Matrix grad_logits(n, p.cols());
  if (has_probs) {
    for (std::size_t i = 0; i < n; ++i) {
      auto pr = p.row(i);
      auto gr = grad_probs.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < pr.size(); ++j) dot += pr[j] * gr[j];
      auto out = grad_logits.row(i);
      for (std::size_t j = 0; j < pr.size(); ++j) out[j] = pr[j] * (gr[j] - dot);
    }
    grads.classifier.weight = transpose_matmul(trace.features, grad_logits);
    grads.classifier.bias = column_sums(grad_logits);
  }

  Matrix upstream = has_probs ? matmul_transpose(grad_logits, model.classifier.weight)
                              : Matrix(trace.features.rows(), trace.features.cols());
  if (has_features) upstream += grad_features;

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const DenseLayer& layer = model.layers[l];
    if (layer.activation == Activation::relu) {
      const Matrix& pre = trace.pre_activations[l];
      auto u = upstream.values();
      auto z = pre.values();
      for (std::size_t k = 0; k < u.size(); ++k)
        if (!(z[k] > 0.0)) u[k] = 0.0;
    }
    grads.layers[l].weight = transpose_matmul(trace.layer_inputs[l], upstream);
    grads.layers[l].bias = column_sums(upstream);
    if (l > 0) upstream = matmul_transpose(upstream, layer.weight);
  }
  return grads;
}

AdamState AdamState::zeros_like(const MlpModel& model) {
  return {ParamGrads::zeros_like(model), ParamGrads::zeros_like(model), 0};
}

void adam_step(MlpModel& model, const ParamGrads& grads, AdamState& state, LearningRates lr,
               AdamHyper hyper) {
  if (grads.layers.size() != model.layers.size() ||
      state.first_moment.layers.size() != model.layers.size() ||
      state.second_moment.layers.size() != model.layers.size())
    fail(ErrorKind::shape, "adam_step: layer count mismatch");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    require_grad_shape(grads.layers[l], model.layers[l]);
    require_grad_shape(state.first_moment.layers[l], model.layers[l]);
    require_grad_shape(state.second_moment.layers[l], model.layers[l]);
  }
  require_grad_shape(grads.classifier, model.classifier);
  require_grad_shape(state.first_moment.classifier, model.classifier);
  require_grad_shape(state.second_moment.classifier, model.classifier);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    adam_layer(model.layers[l], grads.layers[l], state.first_moment.layers[l],
               state.second_moment.layers[l], lr.feature, c1, c2, hyper);
  adam_layer(model.classifier, grads.classifier, state.first_moment.classifier,
             state.second_moment.classifier, lr.classifier, c1, c2, hyper);
}

std::string checkpoint_to_string(const MlpModel& model) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["input_dim"] = model.input_dim();
  j["layers"] = json::array();
  for (const auto& l : model.layers) j["layers"].push_back(layer_to_json(l));
  j["classifier"] = layer_to_json(model.classifier);
  return j.dump() + "\n";
}

MlpModel checkpoint_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      fail(ErrorKind::data, "checkpoint: not a dcan-mlp file");
    if (j.at("version").get<int>() != kCheckpointVersion)
      fail(ErrorKind::data, "checkpoint: unsupported version");
    MlpModel model;
    for (const auto& l : j.at("layers")) model.layers.push_back(layer_from_json(l));
    model.classifier = layer_from_json(j.at("classifier"));
    if (model.input_dim() != j.at("input_dim").get<std::size_t>())
      fail(ErrorKind::data, "checkpoint: input_dim does not match first layer");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    fail(ErrorKind::data, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << checkpoint_to_string(model);
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace dcan

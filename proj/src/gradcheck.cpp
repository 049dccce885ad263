#include "dcan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <json.hpp>

#include "dcan/cmmd.hpp"
#include "dcan/infoloss.hpp"
#include "dcan/model.hpp"
#include "dcan/trainer.hpp"

namespace dcan {

namespace {

using nlohmann::json;

constexpr double kH = kFiniteDifferenceStep;

struct Tracker {
  SuiteReport report;

  void record(double analytic, double numeric, const json& where) {
    ++report.checks;
    const double err = relative_error(analytic, numeric);
    if (err > report.max_relative_error || report.worst_case.empty()) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      json w = where;
      w["analytic"] = analytic;
      w["numeric"] = numeric;
      w["relative_error"] = err;
      report.worst_case = w.dump();
    }
  }

  SuiteReport finish() {
    report.passed = report.max_relative_error <= report.threshold;
    return report;
  }
};

Tracker make_tracker(std::string name, double threshold) {
  Tracker t;
  t.report.name = std::move(name);
  t.report.threshold = threshold;
  return t;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

Matrix random_one_hot(std::mt19937_64& rng, std::size_t n, std::size_t c) {
  std::uniform_int_distribution<int> dist(0, static_cast<int>(c) - 1);
  std::vector<int> labels(n);
  for (int& l : labels) l = dist(rng);
  return one_hot(labels, c);
}

Matrix random_simplex_rows(std::mt19937_64& rng, std::size_t n, std::size_t c, double spread) {
  return softmax(random_matrix(rng, n, c, spread));
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Central difference of f at m(i,j).
double central_difference(Matrix& m, std::size_t i, std::size_t j,
                          const std::function<double()>& f) {
  const double saved = m(i, j);
  m(i, j) = saved + kH;
  const double up = f();
  m(i, j) = saved - kH;
  const double down = f();
  m(i, j) = saved;
  return (up - down) / (2.0 * kH);
}

// Directional difference along e_ij − e_ik, which stays on the simplex.
double tangent_difference(Matrix& p, std::size_t i, std::size_t j, std::size_t k,
                          const std::function<double()>& f) {
  const double pj = p(i, j);
  const double pk = p(i, k);
  p(i, j) = pj + kH;
  p(i, k) = pk - kH;
  const double up = f();
  p(i, j) = pj - kH;
  p(i, k) = pk + kH;
  const double down = f();
  p(i, j) = pj;
  p(i, k) = pk;
  return (up - down) / (2.0 * kH);
}

SuiteReport cmmd_suite(std::uint64_t seed, std::size_t trials) {
  Tracker t = make_tracker("cmmd", kLossGradTolerance);
  const KernelSpec spec = KernelSpec::standard();
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(derive_seed(seed, 100 + trial));
    const std::size_t ns = pick(rng, 1, 8), nt = pick(rng, 1, 8);
    const std::size_t d = pick(rng, 1, 4), c = pick(rng, 1, 3);
    LabeledBatch s{random_matrix(rng, ns, d, 1.0), random_one_hot(rng, ns, c)};
    LabeledBatch tb{random_matrix(rng, nt, d, 1.0), random_one_hot(rng, nt, c)};
    const CmmdResult r = cmmd_loss(s, tb, spec);
    auto value = [&] { return cmmd_loss(s, tb, spec).value; };
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < d; ++j)
        t.record(r.grad_zs(i, j), central_difference(s.z, i, j, value),
                 {{"trial", trial}, {"side", "source"}, {"row", i}, {"col", j}});
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < d; ++j)
        t.record(r.grad_zt(i, j), central_difference(tb.z, i, j, value),
                 {{"trial", trial}, {"side", "target"}, {"row", i}, {"col", j}});
  }
  return t.finish();
}

void check_information_gradient(Tracker& t, Matrix& p, const LossAndGrad& r,
                                const std::function<double()>& value, std::size_t trial) {
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j + 1 < p.cols(); ++j) {
      const std::size_t k = j + 1;
      t.record(r.grad(i, j) - r.grad(i, k), tangent_difference(p, i, j, k, value),
               {{"trial", trial}, {"row", i}, {"plus", j}, {"minus", k}});
    }
}

SuiteReport mi_suite(std::uint64_t seed, std::size_t trials) {
  Tracker t = make_tracker("mi", kLossGradTolerance);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(derive_seed(seed, 200 + trial));
    Matrix p = random_simplex_rows(rng, pick(rng, 1, 8), pick(rng, 2, 5), 1.0);
    const LossAndGrad r = mi_loss(PredictionBatch(p));
    check_information_gradient(t, p, r, [&] { return mi_loss(PredictionBatch(p)).value; }, trial);
  }
  return t.finish();
}

SuiteReport partial_mi_suite(std::uint64_t seed, std::size_t trials) {
  Tracker t = make_tracker("partial_mi", kLossGradTolerance);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(derive_seed(seed, 300 + trial));
    Matrix p = random_simplex_rows(rng, pick(rng, 1, 8), pick(rng, 2, 5), 1.0);
    std::vector<double> mean(p.cols(), 0.0);
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) mean[j] += p(i, j) / static_cast<double>(p.rows());
    const double marginal = entropy(mean);
    // Alternate branches, staying 0.05 nats clear of the switch point.
    const bool capped = trial % 2 == 1 && marginal > 0.1;
    const double gamma1 = capped ? marginal - 0.05 : marginal + 0.05;
    const LossAndGrad r = partial_mi_loss(PredictionBatch(p), gamma1);
    check_information_gradient(
        t, p, r, [&] { return partial_mi_loss(PredictionBatch(p), gamma1).value; }, trial);
  }
  return t.finish();
}

SuiteReport composite_suite(std::uint64_t seed, std::size_t trials) {
  Tracker t = make_tracker("composite", kCompositeGradTolerance);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(derive_seed(seed, 400 + trial));
    const std::size_t input = pick(rng, 2, 4), classes = pick(rng, 2, 4);
    const std::vector<std::size_t> hidden{pick(rng, 3, 6), pick(rng, 2, 5)};
    MlpModel model = MlpModel::initialize(input, hidden, classes, derive_seed(seed, 500 + trial));
    // Nonzero biases keep pre-activations off the ReLU kink when an entire
    // hidden row is inactive.
    std::normal_distribution<double> bias(0.0, 0.3);
    for (auto& layer : model.layers)
      for (double& b : layer.bias) b = bias(rng);
    TrainConfig cfg;
    cfg.hidden = hidden;
    cfg.mode = trial % 2 == 0 ? AdaptMode::uda : AdaptMode::partial;
    cfg.gamma1 = 0.5;
    const std::size_t n = pick(rng, 3, 7);
    std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
    DomainBatch source{random_matrix(rng, n, input, 1.0), {}};
    for (std::size_t i = 0; i < n; ++i) source.labels.push_back(label(rng));
    const Matrix target = random_matrix(rng, n, input, 1.0);

    // Freeze a pseudo-label set so the objective is smooth in the parameters.
    PseudoLabels frozen;
    for (std::size_t i = 0; i < n; i += 2) {
      frozen.indices.push_back(i);
      frozen.classes.push_back(label(rng));
    }
    frozen.labels = one_hot(frozen.classes, classes);

    const ObjectiveEvaluation base = evaluate_objective(model, source, target, cfg, &frozen);
    const auto analytic = base.grads.flatten();
    auto params = flatten_parameters(model);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double saved = params[k];
      params[k] = saved + kH;
      assign_parameters(model, params);
      const double up = evaluate_objective(model, source, target, cfg, &frozen).loss_total;
      params[k] = saved - kH;
      assign_parameters(model, params);
      const double down = evaluate_objective(model, source, target, cfg, &frozen).loss_total;
      params[k] = saved;
      t.record(analytic[k], (up - down) / (2.0 * kH), {{"trial", trial}, {"parameter", k}});
    }
    assign_parameters(model, params);
  }
  return t.finish();
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

std::string GradcheckReport::to_json() const {
  json j{{"seed", seed}, {"trials", trials}, {"passed", passed}, {"suites", json::array()}};
  for (const auto& s : suites)
    j["suites"].push_back({{"name", s.name},
                           {"checks", s.checks},
                           {"max_relative_error", s.max_relative_error},
                           {"threshold", s.threshold},
                           {"passed", s.passed},
                           {"worst_case", json::parse(s.worst_case.empty() ? "null" : s.worst_case)}});
  return j.dump(2);
}

GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t trials) {
  GradcheckReport report{seed, trials, {}, true};
  report.suites.push_back(cmmd_suite(seed, trials));
  report.suites.push_back(mi_suite(seed, trials));
  report.suites.push_back(partial_mi_suite(seed, trials));
  report.suites.push_back(composite_suite(seed, trials));
  for (const auto& s : report.suites) report.passed = report.passed && s.passed;
  return report;
}

}  // namespace dcan

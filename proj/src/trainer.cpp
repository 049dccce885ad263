#include "dcan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "dcan/cmmd.hpp"
#include "dcan/error.hpp"
#include "dcan/infoloss.hpp"
#include "dcan/log.hpp"

namespace dcan {

namespace {

enum SeedStream : std::uint64_t {
  kInitStream = 1,
  kPretrainStream = 2,
  kSourceStream = 3,
  kTargetStream = 4,
};

Matrix scatter_rows(const Matrix& rows, std::span<const std::size_t> indices, std::size_t n) {
  Matrix out(n, rows.cols());
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::ranges::copy(rows.row(r), out.row(indices[r]).begin());
  return out;
}

LossAndGrad information_loss(const PredictionBatch& probs, const TrainConfig& cfg) {
  if (cfg.ablation.no_marginal_entropy) return mi_loss(probs, false);
  if (cfg.mode == AdaptMode::partial) return partial_mi_loss(probs, cfg.gamma1);
  return mi_loss(probs, true);
}

double mean(const std::deque<double>& v, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += v[i];
  return s / static_cast<double>(to - from);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::config, what); };
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) bad("lambda0 must be >= 0");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) bad("lambda1 must be >= 0");
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) bad("gamma0 must be in (0, 1)");
  if (!(gamma1 > 0.0)) bad("gamma1 must be > 0");
  if (batch_n < 2) bad("batch_n must be >= 2");
  if (!(lr_feature > 0.0) || !(lr_classifier > 0.0)) bad("learning rates must be > 0");
  if (log_interval < 1) bad("log_interval must be >= 1");
  if (hidden.empty()) bad("hidden must list at least one layer width");
  for (auto w : hidden)
    if (w == 0) bad("hidden layer widths must be >= 1");
  kernel().validate();
}

KernelSpec TrainConfig::kernel() const { return KernelSpec::uniform(bandwidths, reg_lambda); }

LearningRates TrainConfig::learning_rates() const { return {lr_feature, lr_classifier}; }

Evaluation evaluate(const MlpModel& model, const DomainDataset& ds) {
  const std::size_t c = model.class_count();
  Evaluation ev;
  ev.confusion.assign(c, std::vector<std::size_t>(c, 0));
  ev.prediction_share.assign(c, 0.0);
  if (ds.size() == 0) return ev;
  const auto trace = forward(model, ds.x);
  const auto predicted = argmax_rows(trace.probs.probs());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    ev.prediction_share[p] += 1.0;
    const int truth = ds.labels[i];
    if (truth < 0 || static_cast<std::size_t>(truth) >= c) continue;
    ++ev.confusion[static_cast<std::size_t>(truth)][p];
    ++ev.evaluated;
    if (predicted[i] == truth) ++correct;
  }
  for (double& s : ev.prediction_share) s /= static_cast<double>(ds.size());
  ev.accuracy = ev.evaluated ? static_cast<double>(correct) / static_cast<double>(ev.evaluated) : 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const auto total = std::accumulate(ev.confusion[k].begin(), ev.confusion[k].end(), std::size_t{0});
    if (total == 0)
      ev.per_class_accuracy.emplace_back(std::nullopt);
    else
      ev.per_class_accuracy.emplace_back(static_cast<double>(ev.confusion[k][k]) /
                                         static_cast<double>(total));
  }
  return ev;
}

DomainBatch draw_batch(const DomainDataset& ds, std::span<const std::size_t> indices) {
  DomainBatch b{gather_rows(ds.x, indices), {}};
  for (std::size_t i : indices) b.labels.push_back(ds.labels[i]);
  return b;
}

ObjectiveEvaluation evaluate_objective(const MlpModel& model, const DomainBatch& source,
                                       const Matrix& target_x, const TrainConfig& cfg,
                                       const PseudoLabels* frozen_labels) {
  const std::size_t c = model.class_count();
  const Matrix ys = one_hot(source.labels, c);
  const ForwardTrace fs = forward(model, source.x);
  const ForwardTrace ft = forward(model, target_x);

  ObjectiveEvaluation out;
  out.pseudo = frozen_labels ? *frozen_labels : select_pseudo_labels(ft.probs, cfg.gamma0);

  const LossAndGrad ce = cross_entropy(fs.probs, ys);
  out.loss_sc = ce.value;

  Matrix grad_zs;
  Matrix grad_zt;
  const double lambda0 = cfg.ablation.no_cmmd ? 0.0 : cfg.lambda0;
  if (!cfg.ablation.no_cmmd) {
    const LabeledBatch src{fs.features, ys};
    const LabeledBatch tgt{gather_rows(ft.features, out.pseudo.indices), out.pseudo.labels};
    const CmmdResult cm = cmmd_loss(src, tgt, cfg.kernel());
    out.loss_cmmd = cm.value;
    if (lambda0 != 0.0 && !out.pseudo.indices.empty()) {
      grad_zs = lambda0 * cm.grad_zs;
      grad_zt = scatter_rows(lambda0 * cm.grad_zt, out.pseudo.indices, target_x.rows());
    }
  }

  Matrix grad_pt;
  if (target_x.rows() > 0) {
    const LossAndGrad mi = information_loss(ft.probs, cfg);
    out.loss_mi = mi.value;
    if (cfg.lambda1 != 0.0) grad_pt = cfg.lambda1 * mi.grad;
  }

  out.loss_total = out.loss_sc + lambda0 * out.loss_cmmd + cfg.lambda1 * out.loss_mi;
  out.grads = backward(model, fs, ce.grad, grad_zs);
  if (!grad_pt.empty() || !grad_zt.empty()) out.grads += backward(model, ft, grad_pt, grad_zt);
  return out;
}

double source_step(MlpModel& model, AdamState& adam, const DomainBatch& source,
                   LearningRates lr) {
  const ForwardTrace fs = forward(model, source.x);
  const LossAndGrad ce = cross_entropy(fs.probs, one_hot(source.labels, model.class_count()));
  adam_step(model, backward(model, fs, ce.grad, Matrix{}), adam, lr);
  return ce.value;
}

void pretrain(MlpModel& model, const DomainDataset& source, const TrainConfig& cfg) {
  source.validate();
  if (!source.fully_labeled()) fail(ErrorKind::data, "pretrain: source has unlabeled rows");
  if (cfg.pretrain_epochs == 0) return;
  const std::size_t per_epoch = (source.size() + cfg.batch_n - 1) / cfg.batch_n;
  BatchSampler sampler(source.size(), cfg.batch_n, derive_seed(cfg.seed, kPretrainStream));
  AdamState adam = AdamState::zeros_like(model);
  const LearningRates lr{cfg.lr_classifier, cfg.lr_classifier};
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    double loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b)
      loss += source_step(model, adam, draw_batch(source, sampler.next()), lr);
    log_debug("pretrain epoch " + std::to_string(epoch + 1) + " loss " +
              std::to_string(loss / static_cast<double>(per_epoch)));
  }
}

StepMetrics adapt_step(MlpModel& model, AdamState& adam, const DomainBatch& source,
                       const DomainBatch& target, const TrainConfig& cfg, std::size_t step) {
  try {
    PseudoLabels truth;
    if (cfg.target_labels_in_cmmd) {
      for (std::size_t i = 0; i < target.labels.size(); ++i) {
        if (target.labels[i] < 0) continue;
        truth.indices.push_back(i);
        truth.classes.push_back(target.labels[i]);
      }
      truth.labels = one_hot(truth.classes, model.class_count());
    }
    ObjectiveEvaluation obj = evaluate_objective(model, source, target.x, cfg,
                                                 cfg.target_labels_in_cmmd ? &truth : nullptr);
    adam_step(model, obj.grads, adam, cfg.learning_rates());

    StepMetrics m;
    m.step = step;
    m.loss_sc = obj.loss_sc;
    m.loss_cmmd = obj.loss_cmmd;
    m.loss_mi = obj.loss_mi;
    m.loss_total = obj.loss_total;
    m.pseudo_count = obj.pseudo.indices.size();
    std::size_t known = 0;
    std::size_t right = 0;
    for (std::size_t k = 0; k < obj.pseudo.indices.size(); ++k) {
      const int t = target.labels.empty() ? kUnlabeled : target.labels[obj.pseudo.indices[k]];
      if (t < 0) continue;
      ++known;
      if (t == obj.pseudo.classes[k]) ++right;
    }
    if (known > 0) m.pseudo_accuracy = static_cast<double>(right) / static_cast<double>(known);
    return m;
  } catch (const Error& e) {
    throw Error(e.kind(), "adaptation step " + std::to_string(step) + ": " + e.what());
  }
}

TrainResult train(const DomainDataset& source, const DomainDataset& target,
                  const TrainConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  source.validate();
  target.validate();
  if (!source.fully_labeled()) fail(ErrorKind::data, "train: source has unlabeled rows");
  if (source.x.cols() != target.x.cols())
    fail(ErrorKind::data, "train: source and target feature dimensions differ");
  if (source.class_count != target.class_count)
    fail(ErrorKind::data, "train: source and target class counts differ");

  TrainResult result{
      MlpModel::initialize(source.x.cols(), cfg.hidden, source.class_count,
                           derive_seed(cfg.seed, kInitStream)),
      {}, {}, {}, {}, 0};
  pretrain(result.model, source, cfg);
  result.pretrain_target = evaluate(result.model, target);
  log_info("pretrained: target accuracy " + std::to_string(result.pretrain_target.accuracy));

  AdamState adam = AdamState::zeros_like(result.model);
  BatchSampler source_sampler(source.size(), cfg.batch_n, derive_seed(cfg.seed, kSourceStream));
  BatchSampler target_sampler(target.size(), cfg.batch_n, derive_seed(cfg.seed, kTargetStream));
  std::deque<double> recent;

  for (std::size_t step = 1; step <= cfg.adapt_steps; ++step) {
    const DomainBatch sb = draw_batch(source, source_sampler.next());
    const DomainBatch tb = draw_batch(target, target_sampler.next());
    StepMetrics m = adapt_step(result.model, adam, sb, tb, cfg, step);
    result.steps_run = step;

    bool stop = false;
    if (cfg.early_stop) {
      recent.push_back(m.loss_total);
      if (recent.size() > 200) recent.pop_front();
      if (recent.size() == 200 && std::abs(mean(recent, 100, 200) - mean(recent, 0, 100)) < 1e-5)
        stop = true;
    }
    if (step % cfg.log_interval == 0 || step == cfg.adapt_steps || stop) {
      m.target_accuracy = evaluate(result.model, target).accuracy;
      if (sink) sink(m);
      result.log.push_back(m);
      log_debug("step " + std::to_string(step) + " total " + std::to_string(m.loss_total) +
                " acc " + std::to_string(*m.target_accuracy));
    }
    if (stop) break;
  }
  result.final_target = evaluate(result.model, target);
  result.final_source = evaluate(result.model, source);
  log_info("adapted: target accuracy " + std::to_string(result.final_target.accuracy));
  return result;
}

}  // namespace dcan

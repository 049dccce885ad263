#include <cmath>
#include <set>

#include "doctest.h"
#include "dcan/error.hpp"
#include "dcan/gradcheck.hpp"
#include "dcan/trainer.hpp"

using dcan::ClusterTaskSpec;
using dcan::TrainConfig;

namespace {

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.pretrain_epochs = 10;
  cfg.adapt_steps = 50;
  cfg.lr_feature = cfg.lr_classifier = 2e-3;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto rejects = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    try {
      c.validate();
      return false;
    } catch (const dcan::Error& e) {
      return e.kind() == dcan::ErrorKind::config;
    }
  };
  CHECK(rejects([](TrainConfig& c) { c.lambda0 = -1; }));
  CHECK(rejects([](TrainConfig& c) { c.lambda1 = std::nan(""); }));
  CHECK(rejects([](TrainConfig& c) { c.gamma0 = 1.0; }));
  CHECK(rejects([](TrainConfig& c) { c.gamma1 = 0.0; }));
  CHECK(rejects([](TrainConfig& c) { c.batch_n = 1; }));
  CHECK(rejects([](TrainConfig& c) { c.lr_feature = 0; }));
  CHECK(rejects([](TrainConfig& c) { c.hidden = {}; }));
  CHECK(rejects([](TrainConfig& c) { c.bandwidths = {1.0, 0.0}; }));
  CHECK(rejects([](TrainConfig& c) { c.reg_lambda = 0.0; }));
}

TEST_CASE("seed streams are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::uint64_t stream = 0; stream < 5; ++stream) seen.insert(dcan::derive_seed(seed, stream));
  CHECK(seen.size() == 100);
  CHECK(dcan::derive_seed(3, 1) == dcan::derive_seed(3, 1));
}

TEST_CASE("evaluation counts labeled rows only") {
  dcan::MlpModel m;
  m.layers.push_back({dcan::Matrix::identity(2), {0, 0}, dcan::Activation::identity});
  m.classifier = {dcan::Matrix::identity(2), {0, 0}, dcan::Activation::identity};
  dcan::DomainDataset ds{dcan::Matrix{{2, 0}, {0, 2}, {3, 0}, {0, 1}}, {0, 0, dcan::kUnlabeled, 1},
                         2, "eval"};
  auto ev = dcan::evaluate(m, ds);
  CHECK(ev.evaluated == 3);
  CHECK(ev.accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(ev.confusion[0][0] == 1);
  CHECK(ev.confusion[0][1] == 1);
  CHECK(ev.confusion[1][1] == 1);
  CHECK(ev.prediction_share[0] == doctest::Approx(0.5));
  CHECK(*ev.per_class_accuracy[0] == doctest::Approx(0.5));
  CHECK(*ev.per_class_accuracy[1] == 1.0);
}

TEST_CASE("with both adaptation weights at zero a step is a source-only step") {
  ClusterTaskSpec spec;
  spec.per_class = 20;
  spec.rotation = 0.4;
  auto d = dcan::make_shifted_clusters(spec);
  TrainConfig cfg = quick_config();
  cfg.lambda0 = 0.0;
  cfg.lambda1 = 0.0;
  const std::size_t hidden[] = {8, 8};
  dcan::MlpModel a = dcan::MlpModel::initialize(2, hidden, 5, 4), b = a;
  auto sa = dcan::AdamState::zeros_like(a), sb = sa;
  dcan::BatchSampler src(d.source.size(), 16, 1), tgt(d.target.size(), 16, 2);
  for (std::size_t step = 0; step < 20; ++step) {
    auto sbatch = dcan::draw_batch(d.source, src.next());
    auto tbatch = dcan::draw_batch(d.target, tgt.next());
    dcan::adapt_step(a, sa, sbatch, tbatch, cfg, step);
    dcan::source_step(b, sb, sbatch, cfg.learning_rates());
  }
  CHECK(dcan::flatten_parameters(a) == dcan::flatten_parameters(b));
}

TEST_CASE("pretraining separates linearly separable classes") {
  ClusterTaskSpec spec;
  spec.classes = 2;
  spec.per_class = 100;
  spec.noise = 0.15;
  spec.seed = 8;
  auto d = dcan::make_shifted_clusters(spec);
  TrainConfig cfg = quick_config();
  const std::size_t hidden[] = {16, 16};
  auto m = dcan::MlpModel::initialize(2, hidden, 2, 3);
  dcan::pretrain(m, d.source, cfg);
  CHECK(dcan::evaluate(m, d.source).accuracy >= 0.99);
  d.source.labels[0] = dcan::kUnlabeled;
  CHECK_THROWS_AS(dcan::pretrain(m, d.source, cfg), dcan::Error);
}

TEST_CASE("without a shift target accuracy tracks source accuracy") {
  ClusterTaskSpec spec;
  spec.per_class = 100;
  spec.noise = 0.2;
  spec.seed = 2;
  auto d = dcan::make_shifted_clusters(spec);
  TrainConfig cfg = quick_config();
  cfg.adapt_steps = 100;
  auto r = dcan::train(d.source, d.target, cfg);
  CHECK(std::abs(r.final_target.accuracy - r.final_source.accuracy) <= 0.02);
  CHECK(r.steps_run == 100);
}

TEST_CASE("total loss trends down on the shifted task") {
  ClusterTaskSpec spec;
  spec.per_class = 100;
  spec.rotation = 0.4;
  spec.noise = 0.12;
  auto d = dcan::make_shifted_clusters(spec);
  TrainConfig cfg = quick_config();
  cfg.adapt_steps = 200;
  cfg.log_interval = 1;
  std::vector<double> totals;
  dcan::train(d.source, d.target, cfg,
              [&](const dcan::StepMetrics& m) { totals.push_back(m.loss_total); });
  REQUIRE(totals.size() == 200);
  auto window = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 50; ++i) s += totals[i];
    return s / 50;
  };
  CHECK(window(150) < window(0));
}

TEST_CASE("training logs at the interval and the final step") {
  ClusterTaskSpec spec;
  spec.per_class = 20;
  spec.rotation = 0.3;
  auto d = dcan::make_shifted_clusters(spec);
  TrainConfig cfg = quick_config();
  cfg.adapt_steps = 25;
  cfg.log_interval = 10;
  auto r = dcan::train(d.source, d.target, cfg);
  REQUIRE(r.log.size() == 3);
  CHECK(r.log[0].step == 10);
  CHECK(r.log[2].step == 25);
  for (const auto& m : r.log) {
    CHECK(m.target_accuracy.has_value());
    CHECK(std::isfinite(m.loss_total));
  }
  auto again = dcan::train(d.source, d.target, cfg);
  CHECK(dcan::flatten_parameters(again.model) == dcan::flatten_parameters(r.model));
}

TEST_CASE("train rejects incompatible domains") {
  ClusterTaskSpec spec;
  spec.per_class = 5;
  auto d = dcan::make_shifted_clusters(spec);
  spec.classes = 3;
  auto other = dcan::make_shifted_clusters(spec);
  CHECK_THROWS_AS(dcan::train(d.source, other.target, quick_config()), dcan::Error);
}

TEST_CASE("gradient suites pass on a few seeds") {
  auto report = dcan::run_gradcheck(1, 3);
  CHECK(report.passed);
  CHECK(report.suites.size() == 4);
  for (const auto& s : report.suites) CHECK(s.checks > 0);
  CHECK(dcan::relative_error(1.0, 1.0) == 0.0);
  CHECK(dcan::relative_error(0.0, 1e-9) == doctest::Approx(1e-3));
}

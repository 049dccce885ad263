#include "dcan/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dcan/error.hpp"
#include "dcan/log.hpp"

namespace dcan {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  std::vector<std::string> unknown;
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) unknown.push_back(key);
  if (unknown.empty()) return;
  std::string msg = "unknown key(s) in " + where + ":";
  for (const auto& k : unknown) msg += " '" + k + "'";
  fail(ErrorKind::config, msg);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::config, std::string("key '") + key + "' has the wrong type");
  }
}

// Integers reject negative or fractional JSON numbers instead of wrapping.
void read_count(const json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
    fail(ErrorKind::config, std::string("key '") + key + "' must be a nonnegative integer");
  out = v.get<std::size_t>();
}

void read_seed(const json& j, const char* key, std::uint64_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<long long>() < 0))
    fail(ErrorKind::config, std::string("key '") + key + "' must be a nonnegative integer");
  out = v.get<std::uint64_t>();
}

std::string write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
  return path.string();
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void append_feature_rows(std::ostream& out, const MlpModel& model, const DomainDataset& ds,
                         const char* domain) {
  const ForwardTrace trace = forward(model, ds.x);
  const auto predicted = argmax_rows(trace.probs.probs());
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : trace.features.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << domain << ',' << ds.labels[i] << ',' << predicted[i] << '\n';
  }
}

std::string format_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ClusterTaskSpec DatasetConfig::default_clusters() {
  ClusterTaskSpec spec;
  spec.classes = 5;
  spec.per_class = 200;
  spec.shift = {0.4, 0.2};
  spec.rotation = 0.3;
  spec.noise = 0.14;
  return spec;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "config must be a JSON object");
  reject_unknown(j,
                 {"lambda0", "lambda1", "gamma0", "gamma1", "reg_lambda", "batch_n",
                  "pretrain_epochs", "adapt_steps", "lr_feature", "lr_classifier", "seed", "mode",
                  "ablation", "hidden", "bandwidths", "target_labels_in_cmmd", "early_stop",
                  "log_interval", "dataset"},
                 "config");
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  read(j, "lambda0", t.lambda0);
  read(j, "lambda1", t.lambda1);
  read(j, "gamma0", t.gamma0);
  read(j, "gamma1", t.gamma1);
  read(j, "reg_lambda", t.reg_lambda);
  read_count(j, "batch_n", t.batch_n);
  read_count(j, "pretrain_epochs", t.pretrain_epochs);
  read_count(j, "adapt_steps", t.adapt_steps);
  read(j, "lr_feature", t.lr_feature);
  read(j, "lr_classifier", t.lr_classifier);
  read_seed(j, "seed", t.seed);
  read(j, "hidden", t.hidden);
  read(j, "bandwidths", t.bandwidths);
  read(j, "target_labels_in_cmmd", t.target_labels_in_cmmd);
  read(j, "early_stop", t.early_stop);
  read_count(j, "log_interval", t.log_interval);
  if (j.contains("mode")) {
    std::string mode;
    read(j, "mode", mode);
    if (mode == "uda")
      t.mode = AdaptMode::uda;
    else if (mode == "partial")
      t.mode = AdaptMode::partial;
    else
      fail(ErrorKind::config, "mode must be \"uda\" or \"partial\", got \"" + mode + "\"");
  }
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    if (!a.is_object()) fail(ErrorKind::config, "ablation must be an object");
    reject_unknown(a, {"no_cmmd", "no_marginal_entropy"}, "ablation");
    read(a, "no_cmmd", t.ablation.no_cmmd);
    read(a, "no_marginal_entropy", t.ablation.no_marginal_entropy);
  }

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (!d.is_object()) fail(ErrorKind::config, "dataset must be an object");
    DatasetConfig& ds = cfg.dataset;
    std::string kind = "clusters";
    read(d, "kind", kind);
    if (kind == "clusters") {
      reject_unknown(d,
                     {"kind", "classes", "per_class", "shift", "rotation", "noise", "radius",
                      "seed", "keep_classes"},
                     "dataset");
      ds.kind = DatasetConfig::Kind::clusters;
      read_count(d, "classes", ds.clusters.classes);
      read_count(d, "per_class", ds.clusters.per_class);
      read(d, "shift", ds.clusters.shift);
      read(d, "rotation", ds.clusters.rotation);
      read(d, "noise", ds.clusters.noise);
      read(d, "radius", ds.clusters.radius);
    } else if (kind == "csv") {
      reject_unknown(d, {"kind", "source", "target", "classes", "seed", "keep_classes"},
                     "dataset");
      ds.kind = DatasetConfig::Kind::csv;
      std::string src, tgt;
      read(d, "source", src);
      read(d, "target", tgt);
      if (src.empty() || tgt.empty())
        fail(ErrorKind::config, "csv dataset needs 'source' and 'target' paths");
      ds.source_csv = src;
      ds.target_csv = tgt;
      read_count(d, "classes", ds.csv_classes);
    } else {
      fail(ErrorKind::config, "dataset kind must be \"clusters\" or \"csv\", got \"" + kind + "\"");
    }
    if (d.contains("seed")) {
      std::uint64_t s = 0;
      read_seed(d, "seed", s);
      ds.seed = s;
    }
    if (d.contains("keep_classes") && !d.at("keep_classes").is_null()) {
      std::size_t k = 0;
      read_count(d, "keep_classes", k);
      ds.keep_classes = k;
    }
  }
  cfg.train.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  const TrainConfig& t = train;
  json j{{"lambda0", t.lambda0},
         {"lambda1", t.lambda1},
         {"gamma0", t.gamma0},
         {"gamma1", t.gamma1},
         {"reg_lambda", t.reg_lambda},
         {"batch_n", t.batch_n},
         {"pretrain_epochs", t.pretrain_epochs},
         {"adapt_steps", t.adapt_steps},
         {"lr_feature", t.lr_feature},
         {"lr_classifier", t.lr_classifier},
         {"seed", t.seed},
         {"mode", t.mode == AdaptMode::uda ? "uda" : "partial"},
         {"ablation",
          {{"no_cmmd", t.ablation.no_cmmd},
           {"no_marginal_entropy", t.ablation.no_marginal_entropy}}},
         {"hidden", t.hidden},
         {"bandwidths", t.bandwidths},
         {"target_labels_in_cmmd", t.target_labels_in_cmmd},
         {"early_stop", t.early_stop},
         {"log_interval", t.log_interval}};
  json d;
  if (dataset.kind == DatasetConfig::Kind::clusters) {
    const auto& c = dataset.clusters;
    d = {{"kind", "clusters"}, {"classes", c.classes}, {"per_class", c.per_class},
         {"shift", c.shift},   {"rotation", c.rotation}, {"noise", c.noise},
         {"radius", c.radius}};
  } else {
    d = {{"kind", "csv"},
         {"source", dataset.source_csv.string()},
         {"target", dataset.target_csv.string()},
         {"classes", dataset.csv_classes}};
  }
  d["seed"] = dataset.seed.value_or(t.seed);
  d["keep_classes"] = dataset.keep_classes ? json(*dataset.keep_classes) : json(nullptr);
  j["dataset"] = d;
  return j;
}

DomainPair build_domains(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  DomainPair pair;
  if (d.kind == DatasetConfig::Kind::clusters) {
    ClusterTaskSpec spec = d.clusters;
    spec.seed = d.seed.value_or(cfg.train.seed);
    pair = make_shifted_clusters(spec);
  } else {
    pair.source = load_csv(d.source_csv, d.csv_classes);
    pair.target = load_csv(d.target_csv, d.csv_classes ? d.csv_classes : pair.source.class_count);
    if (d.csv_classes == 0) {
      const auto c = std::max(pair.source.class_count, pair.target.class_count);
      pair.source.class_count = pair.target.class_count = c;
    }
  }
  if (d.keep_classes) pair.target = make_partial_target(pair.target, *d.keep_classes);
  return pair;
}

json metrics_to_json(const StepMetrics& m) {
  return json{{"step", m.step},
              {"loss_sc", m.loss_sc},
              {"loss_cmmd", m.loss_cmmd},
              {"loss_mi", m.loss_mi},
              {"loss_total", m.loss_total},
              {"pseudo_count", m.pseudo_count},
              {"pseudo_accuracy", optional_to_json(m.pseudo_accuracy)},
              {"target_accuracy", optional_to_json(m.target_accuracy)}};
}

json evaluation_to_json(const Evaluation& ev) {
  json per_class = json::array();
  for (const auto& a : ev.per_class_accuracy) per_class.push_back(optional_to_json(a));
  return json{{"accuracy", ev.accuracy},
              {"per_class_accuracy", per_class},
              {"confusion", ev.confusion},
              {"prediction_share", ev.prediction_share},
              {"evaluated", ev.evaluated}};
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.train.validate();
  const DomainPair domains = build_domains(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out_dir.string() + ": " + ec.message());

  write_text(out_dir / "config-echo.json", cfg.to_json().dump(2) + "\n");

  std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) fail(ErrorKind::io, "cannot write metrics.jsonl");
  const TrainResult result =
      train(domains.source, domains.target, cfg.train,
            [&metrics](const StepMetrics& m) { metrics << metrics_to_json(m).dump() << '\n'; });
  metrics.close();

  save_checkpoint(result.model, out_dir / "model.ckpt");
  dump_embeddings(cfg, result.model, out_dir / "embeddings.csv");

  RunSummary summary;
  summary.target_accuracy = result.final_target.accuracy;
  summary.pretrain_target_accuracy = result.pretrain_target.accuracy;
  summary.summary = evaluation_to_json(result.final_target);
  summary.summary["pretrain_target"] = evaluation_to_json(result.pretrain_target);
  summary.summary["source_accuracy"] = result.final_source.accuracy;
  summary.summary["steps_run"] = result.steps_run;
  write_text(out_dir / "summary.json", summary.summary.dump(2) + "\n");
  return summary;
}

void dump_embeddings(const ExperimentConfig& cfg, const MlpModel& model,
                     const std::filesystem::path& out_csv) {
  const DomainPair domains = build_domains(cfg);
  if (model.input_dim() != domains.source.x.cols() ||
      model.class_count() != domains.source.class_count)
    fail(ErrorKind::data, "checkpoint does not match the configured dataset (input " +
                              std::to_string(model.input_dim()) + ", classes " +
                              std::to_string(model.class_count()) + ")");
  std::ofstream out(out_csv, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + out_csv.string());
  for (std::size_t k = 0; k < model.feature_dim(); ++k) out << 'f' << k << ',';
  out << "domain,label,predicted\n";
  append_feature_rows(out, model, domains.source, "source");
  append_feature_rows(out, model, domains.target, "target");
  if (!out) fail(ErrorKind::io, "write failed for " + out_csv.string());
}

ExperimentConfig with_axis_value(ExperimentConfig cfg, const std::string& axis, double value) {
  auto as_count = [&](const char* name) {
    if (!(value >= 0.0) || value != std::floor(value))
      fail(ErrorKind::config, std::string(name) + " sweep values must be nonnegative integers");
    return static_cast<std::size_t>(value);
  };
  if (axis == "batch_n")
    cfg.train.batch_n = as_count("batch_n");
  else if (axis == "keep_classes")
    cfg.dataset.keep_classes = as_count("keep_classes");
  else if (axis == "gamma0")
    cfg.train.gamma0 = value;
  else if (axis == "lambda0")
    cfg.train.lambda0 = value;
  else if (axis == "lambda1")
    cfg.train.lambda1 = value;
  else
    fail(ErrorKind::config, "unknown sweep axis '" + axis + "'");
  cfg.train.validate();
  return cfg;
}

json run_sweep(const ExperimentConfig& cfg, const std::string& axis,
               const std::vector<double>& values, const std::filesystem::path& out_dir) {
  if (values.empty()) fail(ErrorKind::config, "sweep needs at least one value");
  if (std::ranges::find(sweep_axes(), axis) == sweep_axes().end())
    fail(ErrorKind::config, "unknown sweep axis '" + axis + "'");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out_dir.string() + ": " + ec.message());

  json runs = json::array();
  std::ostringstream csv;
  csv << axis << ",status,target_accuracy,pretrain_target_accuracy,dir\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string dir = axis + "-" + std::to_string(i);
    json row{{"value", values[i]}, {"dir", dir}};
    try {
      const RunSummary s = run_experiment(with_axis_value(cfg, axis, values[i]), out_dir / dir);
      row["status"] = "ok";
      row["target_accuracy"] = s.target_accuracy;
      row["pretrain_target_accuracy"] = s.pretrain_target_accuracy;
      csv << format_value(values[i]) << ",ok," << format_value(s.target_accuracy) << ','
          << format_value(s.pretrain_target_accuracy) << ',' << dir << '\n';
    } catch (const Error& e) {
      log_info("sweep run " + dir + " failed: " + e.what());
      row["status"] = "failed";
      row["error"] = e.what();
      row["target_accuracy"] = nullptr;
      row["pretrain_target_accuracy"] = nullptr;
      csv << format_value(values[i]) << ",failed,,," << dir << '\n';
    }
    runs.push_back(row);
  }
  json table{{"axis", axis}, {"runs", runs}};
  write_text(out_dir / "sweep.json", table.dump(2) + "\n");
  write_text(out_dir / "sweep.csv", csv.str());
  return table;
}

}  // namespace dcan

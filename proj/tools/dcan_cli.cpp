// Command-line front end over the dcan C API.
//
//   dcan train --config cfg.json --out runs/a [--seed N]
//   dcan gradcheck [--seed N] [--trials T]
//   dcan dump-embeddings --config cfg.json --checkpoint runs/a/model.ckpt --out emb.csv
//   dcan sweep --config cfg.json --axis batch_n --values 8,16,32,64 --out runs/sweep
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcan/dcan.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code(dcan_status s) {
  switch (s) {
    case DCAN_OK: return kExitOk;
    case DCAN_ERR_CONFIG:
    case DCAN_ERR_INVALID_ARGUMENT: return kExitUsage;
    default: return kExitRuntime;
  }
}

int report(dcan_status s, const char* what) {
  if (s != DCAN_OK)
    std::cerr << "dcan " << what << ": " << dcan_status_name(s) << ": " << dcan_last_error()
              << "\n";
  return exit_code(s);
}

struct ExperimentDeleter {
  void operator()(dcan_experiment* e) const { dcan_experiment_free(e); }
};
using ExperimentPtr = std::unique_ptr<dcan_experiment, ExperimentDeleter>;

struct StringDeleter {
  void operator()(char* s) const { dcan_string_free(s); }
};
using CString = std::unique_ptr<char, StringDeleter>;

dcan_status open_experiment(const std::string& path, std::optional<std::uint64_t> seed,
                            ExperimentPtr& out) {
  dcan_experiment* raw = nullptr;
  const dcan_status s = path.empty() ? dcan_experiment_from_json("{}", &raw)
                                     : dcan_experiment_from_file(path.c_str(), &raw);
  out.reset(raw);
  if (s == DCAN_OK && seed) return dcan_experiment_set_seed(out.get(), *seed);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional-alignment domain adaptation on small dense data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dcan_version()));

  std::string config_path;
  std::string out_path;
  std::string checkpoint;
  std::string axis;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::size_t trials = 5;

  auto* train = app.add_subcommand("train", "Pretrain on source, then adapt to target");
  train->add_option("--config", config_path, "JSON config (omit for all defaults)");
  train->add_option("--out", out_path, "Output directory")->required();
  auto* train_seed = train->add_option("--seed", seed, "Override the config seed");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  grad->add_option("--seed", seed, "Generator seed");
  grad->add_option("--trials", trials, "Random instances per suite");

  auto* dump = app.add_subcommand("dump-embeddings", "Write deep features for both domains");
  dump->add_option("--config", config_path, "JSON config used for training");
  dump->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  dump->add_option("--out", out_path, "Output CSV")->required();
  auto* dump_seed = dump->add_option("--seed", seed, "Override the config seed");

  auto* sweep = app.add_subcommand("sweep", "One training run per value of an axis");
  sweep->add_option("--config", config_path, "JSON config");
  sweep->add_option("--axis", axis, "batch_n | keep_classes | gamma0 | lambda0 | lambda1")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--out", out_path, "Output directory")->required();
  auto* sweep_seed = sweep->add_option("--seed", seed, "Override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  auto seed_if = [&](CLI::Option* opt) {
    return opt->count() > 0 ? std::optional<std::uint64_t>(seed) : std::nullopt;
  };

  if (*train) {
    ExperimentPtr exp;
    if (dcan_status s = open_experiment(config_path, seed_if(train_seed), exp); s != DCAN_OK)
      return report(s, "train");
    double accuracy = 0.0;
    const dcan_status s = dcan_experiment_train(exp.get(), out_path.c_str(), &accuracy);
    if (s == DCAN_OK) std::printf("target_accuracy %.6f\n", accuracy);
    return report(s, "train");
  }

  if (*grad) {
    if (trials == 0) {
      std::cerr << "dcan gradcheck: --trials must be >= 1\n";
      return kExitUsage;
    }
    char* raw = nullptr;
    int passed = 0;
    const dcan_status s = dcan_gradcheck(seed, trials, &raw, &passed);
    if (s != DCAN_OK) return report(s, "gradcheck");
    CString text(raw);
    const auto j = nlohmann::json::parse(text.get());
    for (const auto& suite : j.at("suites")) {
      std::printf("%-12s checks %-6zu max_rel_err %.3e threshold %.0e %s\n",
                  suite.at("name").get<std::string>().c_str(),
                  suite.at("checks").get<std::size_t>(),
                  suite.at("max_relative_error").get<double>(),
                  suite.at("threshold").get<double>(),
                  suite.at("passed").get<bool>() ? "PASS" : "FAIL");
      if (!suite.at("passed").get<bool>())
        std::printf("  worst case: %s\n", suite.at("worst_case").dump().c_str());
    }
    return passed ? kExitOk : kExitRuntime;
  }

  if (*dump) {
    ExperimentPtr exp;
    if (dcan_status s = open_experiment(config_path, seed_if(dump_seed), exp); s != DCAN_OK)
      return report(s, "dump-embeddings");
    return report(dcan_experiment_dump_embeddings(exp.get(), checkpoint.c_str(), out_path.c_str()),
                  "dump-embeddings");
  }

  if (*sweep) {
    ExperimentPtr exp;
    if (dcan_status s = open_experiment(config_path, seed_if(sweep_seed), exp); s != DCAN_OK)
      return report(s, "sweep");
    char* raw = nullptr;
    const dcan_status s = dcan_experiment_sweep(exp.get(), axis.c_str(), values.data(),
                                                values.size(), out_path.c_str(), &raw);
    if (s != DCAN_OK) return report(s, "sweep");
    CString table(raw);
    const auto j = nlohmann::json::parse(table.get());
    for (const auto& run : j.at("runs")) {
      if (run.at("status") == "ok")
        std::printf("%s=%g target_accuracy %.6f\n", axis.c_str(), run.at("value").get<double>(),
                    run.at("target_accuracy").get<double>());
      else
        std::printf("%s=%g FAILED %s\n", axis.c_str(), run.at("value").get<double>(),
                    run.at("error").get<std::string>().c_str());
    }
    return kExitOk;
  }
  return kExitUsage;
}

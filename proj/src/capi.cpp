#include "dcan/dcan.h"

#include <cstring>
#include <new>
#include <string>

#include "dcan/cmmd.hpp"
#include "dcan/error.hpp"
#include "dcan/experiment.hpp"
#include "dcan/gradcheck.hpp"
#include "dcan/infoloss.hpp"
#include "dcan/model.hpp"
#include "dcan/pseudo.hpp"

struct dcan_experiment {
  dcan::ExperimentConfig config;
};

struct dcan_model {
  dcan::MlpModel model;
};

namespace {

thread_local std::string g_last_error;

dcan_status to_status(dcan::ErrorKind kind) {
  using dcan::ErrorKind;
  switch (kind) {
    case ErrorKind::shape: return DCAN_ERR_SHAPE;
    case ErrorKind::singular: return DCAN_ERR_SINGULAR;
    case ErrorKind::numeric: return DCAN_ERR_NUMERIC;
    case ErrorKind::domain: return DCAN_ERR_DOMAIN;
    case ErrorKind::config: return DCAN_ERR_CONFIG;
    case ErrorKind::data: return DCAN_ERR_DATA;
    case ErrorKind::io: return DCAN_ERR_IO;
  }
  return DCAN_ERR_INTERNAL;
}

template <class F>
dcan_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return DCAN_OK;
  } catch (const dcan::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return DCAN_ERR_INTERNAL;
}

dcan_status null_argument(const char* name) {
  g_last_error = std::string("argument '") + name + "' must not be NULL";
  return DCAN_ERR_INVALID_ARGUMENT;
}

#define DCAN_REQUIRE(ptr)                          \
  do {                                             \
    if ((ptr) == nullptr) return null_argument(#ptr); \
  } while (0)

char* duplicate(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dcan::Matrix copy_in(const double* data, std::size_t rows, std::size_t cols) {
  return dcan::Matrix(rows, cols, std::vector<double>(data, data + rows * cols));
}

void copy_out(const dcan::Matrix& m, double* out) {
  if (out) std::memcpy(out, m.values().data(), m.size() * sizeof(double));
}

}  // namespace

extern "C" {

const char* dcan_version(void) { return "1.0.0"; }

const char* dcan_last_error(void) { return g_last_error.c_str(); }

const char* dcan_status_name(dcan_status status) {
  switch (status) {
    case DCAN_OK: return "ok";
    case DCAN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DCAN_ERR_SHAPE: return "shape error";
    case DCAN_ERR_SINGULAR: return "singular matrix";
    case DCAN_ERR_NUMERIC: return "numeric error";
    case DCAN_ERR_DOMAIN: return "domain error";
    case DCAN_ERR_CONFIG: return "config error";
    case DCAN_ERR_DATA: return "data error";
    case DCAN_ERR_IO: return "io error";
    case DCAN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void dcan_string_free(char* s) { delete[] s; }

dcan_status dcan_experiment_from_file(const char* path, dcan_experiment** out) {
  DCAN_REQUIRE(path);
  DCAN_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new dcan_experiment{dcan::ExperimentConfig::from_file(path)}; });
}

dcan_status dcan_experiment_from_json(const char* json_text, dcan_experiment** out) {
  DCAN_REQUIRE(json_text);
  DCAN_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      dcan::fail(dcan::ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new dcan_experiment{dcan::ExperimentConfig::from_json(j)};
  });
}

void dcan_experiment_free(dcan_experiment* exp) { delete exp; }

dcan_status dcan_experiment_set_seed(dcan_experiment* exp, uint64_t seed) {
  DCAN_REQUIRE(exp);
  exp->config.train.seed = seed;
  return DCAN_OK;
}

dcan_status dcan_experiment_to_json(const dcan_experiment* exp, char** json_out) {
  DCAN_REQUIRE(exp);
  DCAN_REQUIRE(json_out);
  return guarded([&] { *json_out = duplicate(exp->config.to_json().dump(2)); });
}

dcan_status dcan_experiment_train(const dcan_experiment* exp, const char* out_dir,
                                  double* target_accuracy) {
  DCAN_REQUIRE(exp);
  DCAN_REQUIRE(out_dir);
  return guarded([&] {
    const auto summary = dcan::run_experiment(exp->config, out_dir);
    if (target_accuracy) *target_accuracy = summary.target_accuracy;
  });
}

dcan_status dcan_experiment_dump_embeddings(const dcan_experiment* exp,
                                            const char* checkpoint_path, const char* out_csv) {
  DCAN_REQUIRE(exp);
  DCAN_REQUIRE(checkpoint_path);
  DCAN_REQUIRE(out_csv);
  return guarded([&] {
    dcan::dump_embeddings(exp->config, dcan::load_checkpoint(checkpoint_path), out_csv);
  });
}

dcan_status dcan_experiment_sweep(const dcan_experiment* exp, const char* axis,
                                  const double* values, size_t count, const char* out_dir,
                                  char** table_json) {
  DCAN_REQUIRE(exp);
  DCAN_REQUIRE(axis);
  DCAN_REQUIRE(out_dir);
  if (count > 0) DCAN_REQUIRE(values);
  return guarded([&] {
    const auto table = dcan::run_sweep(exp->config, axis,
                                       std::vector<double>(values, values + count), out_dir);
    if (table_json) *table_json = duplicate(table.dump(2));
  });
}

dcan_status dcan_gradcheck(uint64_t seed, size_t trials, char** report_json, int* all_passed) {
  if (trials == 0) {
    g_last_error = "trials must be >= 1";
    return DCAN_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    const auto report = dcan::run_gradcheck(seed, trials);
    if (report_json) *report_json = duplicate(report.to_json());
    if (all_passed) *all_passed = report.passed ? 1 : 0;
  });
}

dcan_status dcan_model_load(const char* path, dcan_model** out) {
  DCAN_REQUIRE(path);
  DCAN_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new dcan_model{dcan::load_checkpoint(path)}; });
}

dcan_status dcan_model_save(const dcan_model* model, const char* path) {
  DCAN_REQUIRE(model);
  DCAN_REQUIRE(path);
  return guarded([&] { dcan::save_checkpoint(model->model, path); });
}

void dcan_model_free(dcan_model* model) { delete model; }

dcan_status dcan_model_dims(const dcan_model* model, size_t* input_dim, size_t* feature_dim,
                            size_t* class_count) {
  DCAN_REQUIRE(model);
  if (input_dim) *input_dim = model->model.input_dim();
  if (feature_dim) *feature_dim = model->model.feature_dim();
  if (class_count) *class_count = model->model.class_count();
  return DCAN_OK;
}

dcan_status dcan_model_forward(const dcan_model* model, const double* x, size_t rows,
                               double* features, double* probs) {
  DCAN_REQUIRE(model);
  if (rows > 0) DCAN_REQUIRE(x);
  return guarded([&] {
    const auto trace =
        dcan::forward(model->model, copy_in(x, rows, model->model.input_dim()));
    copy_out(trace.features, features);
    copy_out(trace.probs.probs(), probs);
  });
}

dcan_status dcan_cmmd_loss(const double* zs, const int* ys, size_t ns, const double* zt,
                           const int* yt, size_t nt, size_t dim, size_t class_count,
                           const double* bandwidths, size_t bandwidth_count, double reg_lambda,
                           double* value, double* grad_zs, double* grad_zt) {
  if (ns > 0) {
    DCAN_REQUIRE(zs);
    DCAN_REQUIRE(ys);
  }
  if (nt > 0) {
    DCAN_REQUIRE(zt);
    DCAN_REQUIRE(yt);
  }
  DCAN_REQUIRE(bandwidths);
  DCAN_REQUIRE(value);
  return guarded([&] {
    const auto spec = dcan::KernelSpec::uniform(
        std::vector<double>(bandwidths, bandwidths + bandwidth_count), reg_lambda);
    spec.validate();
    const dcan::LabeledBatch s{copy_in(zs, ns, dim),
                               dcan::one_hot(std::span<const int>(ys, ns), class_count)};
    const dcan::LabeledBatch t{copy_in(zt, nt, dim),
                               dcan::one_hot(std::span<const int>(yt, nt), class_count)};
    const auto r = dcan::cmmd_loss(s, t, spec);
    *value = r.value;
    copy_out(r.grad_zs, grad_zs);
    copy_out(r.grad_zt, grad_zt);
  });
}

dcan_status dcan_mi_loss(const double* probs, size_t n, size_t c, double gamma1, double* value,
                         double* grad) {
  if (n > 0) DCAN_REQUIRE(probs);
  DCAN_REQUIRE(value);
  return guarded([&] {
    const dcan::PredictionBatch batch(copy_in(probs, n, c));
    const auto r = gamma1 > 0.0 ? dcan::partial_mi_loss(batch, gamma1) : dcan::mi_loss(batch);
    *value = r.value;
    copy_out(r.grad, grad);
  });
}

dcan_status dcan_select_pseudo_labels(const double* probs, size_t n, size_t c, double gamma0,
                                      int* selected, size_t* count) {
  if (n > 0) {
    DCAN_REQUIRE(probs);
    DCAN_REQUIRE(selected);
  }
  return guarded([&] {
    const auto pl = dcan::select_pseudo_labels(dcan::PredictionBatch(copy_in(probs, n, c)), gamma0);
    for (size_t i = 0; i < n; ++i) selected[i] = -1;
    for (size_t k = 0; k < pl.indices.size(); ++k) selected[pl.indices[k]] = pl.classes[k];
    if (count) *count = pl.indices.size();
  });
}

}  // extern "C"

/* C interface to the dcan library.
 *
 * Every function returns a dcan_status. On failure a message describing the
 * error is available from dcan_last_error() until the next call on the same
 * thread. Handles are opaque and owned by the caller; release them with the
 * matching *_free function. Strings returned through char** are released with
 * dcan_string_free.
 *
 * Matrices cross the boundary as row-major double arrays; labels as int
 * arrays of class indices (-1 = unlabeled where allowed).
 */
#ifndef DCAN_DCAN_H
#define DCAN_DCAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DCAN_BUILDING_LIBRARY)
#    define DCAN_API __declspec(dllexport)
#  else
#    define DCAN_API __declspec(dllimport)
#  endif
#else
#  define DCAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcan_status {
  DCAN_OK = 0,
  DCAN_ERR_INVALID_ARGUMENT = 1, /* null pointer or bad scalar argument */
  DCAN_ERR_SHAPE = 2,
  DCAN_ERR_SINGULAR = 3,
  DCAN_ERR_NUMERIC = 4,
  DCAN_ERR_DOMAIN = 5,
  DCAN_ERR_CONFIG = 6,
  DCAN_ERR_DATA = 7,
  DCAN_ERR_IO = 8,
  DCAN_ERR_INTERNAL = 9
} dcan_status;

typedef struct dcan_experiment dcan_experiment;
typedef struct dcan_model dcan_model;

DCAN_API const char* dcan_version(void);
DCAN_API const char* dcan_last_error(void);
DCAN_API const char* dcan_status_name(dcan_status status);
DCAN_API void dcan_string_free(char* s);

/* Experiments: a training configuration plus a dataset description. */
DCAN_API dcan_status dcan_experiment_from_file(const char* path, dcan_experiment** out);
DCAN_API dcan_status dcan_experiment_from_json(const char* json_text, dcan_experiment** out);
DCAN_API void dcan_experiment_free(dcan_experiment* exp);
DCAN_API dcan_status dcan_experiment_set_seed(dcan_experiment* exp, uint64_t seed);
/* Resolved configuration with every default filled in. */
DCAN_API dcan_status dcan_experiment_to_json(const dcan_experiment* exp, char** json_out);

/* Runs pretraining and adaptation, writing config-echo.json, metrics.jsonl,
 * summary.json, model.ckpt and embeddings.csv into out_dir. target_accuracy
 * may be NULL. */
DCAN_API dcan_status dcan_experiment_train(const dcan_experiment* exp, const char* out_dir,
                                           double* target_accuracy);

DCAN_API dcan_status dcan_experiment_dump_embeddings(const dcan_experiment* exp,
                                                     const char* checkpoint_path,
                                                     const char* out_csv);

/* axis is one of batch_n, keep_classes, gamma0, lambda0, lambda1. Writes
 * sweep.json and sweep.csv under out_dir; the JSON table is returned through
 * table_json when non-NULL. */
DCAN_API dcan_status dcan_experiment_sweep(const dcan_experiment* exp, const char* axis,
                                           const double* values, size_t count,
                                           const char* out_dir, char** table_json);

/* Finite-difference verification of every analytic gradient. all_passed is
 * set to 1 when each suite is within its threshold. */
DCAN_API dcan_status dcan_gradcheck(uint64_t seed, size_t trials, char** report_json,
                                    int* all_passed);

/* Models. */
DCAN_API dcan_status dcan_model_load(const char* path, dcan_model** out);
DCAN_API dcan_status dcan_model_save(const dcan_model* model, const char* path);
DCAN_API void dcan_model_free(dcan_model* model);
DCAN_API dcan_status dcan_model_dims(const dcan_model* model, size_t* input_dim,
                                     size_t* feature_dim, size_t* class_count);
/* x is rows×input_dim; features (rows×feature_dim) and probs
 * (rows×class_count) may each be NULL. */
DCAN_API dcan_status dcan_model_forward(const dcan_model* model, const double* x, size_t rows,
                                        double* features, double* probs);

/* Loss functions on raw buffers. */

/* Gaussian-mixture CMMD between labeled source (ns×dim) and target (nt×dim)
 * features. grad_zs and grad_zt may be NULL. */
DCAN_API dcan_status dcan_cmmd_loss(const double* zs, const int* ys, size_t ns, const double* zt,
                                    const int* yt, size_t nt, size_t dim, size_t class_count,
                                    const double* bandwidths, size_t bandwidth_count,
                                    double reg_lambda, double* value, double* grad_zs,
                                    double* grad_zt);

/* Mutual-information loss over n×c probabilities. gamma1 <= 0 selects the
 * unmodified loss; gamma1 > 0 the capped partial variant. grad may be NULL. */
DCAN_API dcan_status dcan_mi_loss(const double* probs, size_t n, size_t c, double gamma1,
                                  double* value, double* grad);

/* Rows whose top probability exceeds gamma0. selected must hold n entries;
 * selected[i] receives the pseudo-label or -1. count may be NULL. */
DCAN_API dcan_status dcan_select_pseudo_labels(const double* probs, size_t n, size_t c,
                                               double gamma0, int* selected, size_t* count);

#ifdef __cplusplus
}
#endif

#endif /* DCAN_DCAN_H */

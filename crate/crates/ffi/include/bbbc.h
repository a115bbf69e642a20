#ifndef BBBC_H
#define BBBC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * No label column.
 */
#define BBBC_LABEL_NONE -1

/**
 * The label is the last column.
 */
#define BBBC_LABEL_LAST -2

typedef enum BbbcMetric {
  BBBC_METRIC_SQUARED_EUCLIDEAN = 0,
  BBBC_METRIC_EUCLIDEAN = 1,
} BbbcMetric;

typedef enum BbbcStatus {
  BBBC_STATUS_OK = 0,
  BBBC_STATUS_INVALID_ARGUMENT = 1,
  BBBC_STATUS_NULL_POINTER = 2,
  BBBC_STATUS_PARSE_ERROR = 3,
  BBBC_STATUS_FORMAT_ERROR = 4,
  BBBC_STATUS_IO_ERROR = 5,
  BBBC_STATUS_USAGE_ERROR = 6,
  BBBC_STATUS_BUFFER_TOO_SMALL = 7,
  BBBC_STATUS_CALLBACK_FAILED = 8,
  BBBC_STATUS_PANIC = 9,
} BbbcStatus;

typedef enum BbbcVariant {
  BBBC_VARIANT_CLASSIC = 0,
  BBBC_VARIANT_MEMORY_ENRICHED = 1,
} BbbcVariant;

typedef struct BbbcClusterModel BbbcClusterModel;

typedef struct BbbcDataset BbbcDataset;

typedef struct BbbcObjective BbbcObjective;

typedef struct BbbcTrace BbbcTrace;

/**
 * Optimizer settings. Obtain defaults from [`bbbc_config_default`].
 */
typedef struct BbbcConfig {
  size_t num_stars;
  size_t max_iters;
  size_t memory_capacity;
  double alpha0;
  double alpha_growth;
  double alpha_cap;
  uint64_t seed;
  double epsilon_cost;
  size_t first_iteration_index;
} BbbcConfig;

/**
 * Cost callback: writes the cost of `x` (length `dim`) to `out_cost` and
 * returns 0, or returns nonzero to abort the run.
 */
typedef int (*BbbcCostFn)(const double *x, size_t dim, void *user_data, double *out_cost);

typedef struct BbbcRunSummary {
  double best;
  double average;
  double std;
  size_t n_runs;
} BbbcRunSummary;

typedef struct BbbcTestResult {
  double statistic;
  double p_value;
  double df;
} BbbcTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or an empty string.
 * The pointer stays valid until the next `bbbc_*` call on this thread.
 */
const char *bbbc_last_error_message(void);

struct BbbcConfig bbbc_config_default(void);

/**
 * Creates one of the built-in benchmark functions by lowercase name
 * (`sphere`, `rastrigin`, `levy`, ...).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BbbcStatus bbbc_objective_benchmark(const char *name, size_t dim, struct BbbcObjective **out);

/**
 * Wraps a C cost function over the box `[lower, upper]`.
 *
 * # Safety
 * `lower` and `upper` must point to `dim` doubles. `cost` is called with
 * `user_data` from the thread running the optimizer for as long as the
 * objective lives.
 */
enum BbbcStatus bbbc_objective_callback(const double *lower,
                                        const double *upper,
                                        size_t dim,
                                        BbbcCostFn cost,
                                        void *user_data,
                                        struct BbbcObjective **out);

/**
 * # Safety
 * `objective` must be null or a handle from a `bbbc_objective_*` constructor.
 */
void bbbc_objective_free(struct BbbcObjective *objective);

/**
 * # Safety
 * `objective` must be a valid handle and `out` a valid pointer.
 */
enum BbbcStatus bbbc_objective_dim(const struct BbbcObjective *objective, size_t *out);

/**
 * Evaluates the objective at `x`.
 *
 * # Safety
 * `x` must point to `dim` doubles.
 */
enum BbbcStatus bbbc_objective_evaluate(const struct BbbcObjective *objective,
                                        const double *x,
                                        size_t dim,
                                        double *out);

/**
 * Runs one seeded optimization and returns its trace.
 *
 * # Safety
 * `objective` and `config` must be valid pointers; `out` receives a handle
 * to release with [`bbbc_trace_free`].
 */
enum BbbcStatus bbbc_optimize(const struct BbbcObjective *objective,
                              const struct BbbcConfig *config,
                              enum BbbcVariant variant,
                              struct BbbcTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from [`bbbc_optimize`].
 */
void bbbc_trace_free(struct BbbcTrace *trace);

/**
 * Number of recorded iterations.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum BbbcStatus bbbc_trace_iterations(const struct BbbcTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum BbbcStatus bbbc_trace_dim(const struct BbbcTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum BbbcStatus bbbc_trace_best_cost(const struct BbbcTrace *trace, double *out);

/**
 * Objective evaluations spent on stars and the starting point.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum BbbcStatus bbbc_trace_evaluations(const struct BbbcTrace *trace, uint64_t *out);

/**
 * Copies the best point into `out` (room for `len` doubles).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum BbbcStatus bbbc_trace_best_point(const struct BbbcTrace *trace, double *out, size_t len);

/**
 * Copies the best-so-far cost of every iteration into `out`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum BbbcStatus bbbc_trace_best_costs(const struct BbbcTrace *trace, double *out, size_t len);

/**
 * Copies the center-of-mass cost of every iteration into `out`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum BbbcStatus bbbc_trace_center_costs(const struct BbbcTrace *trace, double *out, size_t len);

/**
 * Builds a dataset from `n` row-major points of dimension `d`.
 *
 * # Safety
 * `values` must point to `n * d` doubles.
 */
enum BbbcStatus bbbc_dataset_from_rows(const double *values,
                                       size_t n,
                                       size_t d,
                                       struct BbbcDataset **out);

/**
 * Loads a numeric CSV. `label_column` is a zero-based index,
 * [`BBBC_LABEL_NONE`], or [`BBBC_LABEL_LAST`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BbbcStatus bbbc_dataset_load_csv(const char *path,
                                      int64_t label_column,
                                      char delimiter,
                                      bool has_header,
                                      struct BbbcDataset **out);

/**
 * # Safety
 * `dataset` must be null or a handle from a `bbbc_dataset_*` constructor.
 */
void bbbc_dataset_free(struct BbbcDataset *dataset);

/**
 * # Safety
 * All pointers must be valid.
 */
enum BbbcStatus bbbc_dataset_shape(const struct BbbcDataset *dataset,
                                   size_t *out_rows,
                                   size_t *out_cols);

/**
 * Searches for `k` centers. `refine_steps > 0` applies that many Lloyd
 * steps to every star before it is evaluated.
 *
 * # Safety
 * `dataset` and `config` must be valid; `out` receives a handle to release
 * with [`bbbc_model_free`].
 */
enum BbbcStatus bbbc_cluster(const struct BbbcDataset *dataset,
                             size_t k,
                             enum BbbcMetric metric,
                             const struct BbbcConfig *config,
                             enum BbbcVariant variant,
                             size_t refine_steps,
                             struct BbbcClusterModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`bbbc_cluster`].
 */
void bbbc_model_free(struct BbbcClusterModel *model);

/**
 * # Safety
 * All pointers must be valid.
 */
enum BbbcStatus bbbc_model_cost(const struct BbbcClusterModel *model, double *out);

/**
 * Number of centers and their dimension.
 *
 * # Safety
 * All pointers must be valid.
 */
enum BbbcStatus bbbc_model_shape(const struct BbbcClusterModel *model,
                                 size_t *out_k,
                                 size_t *out_dim);

/**
 * Copies the `k * dim` row-major centers into `out`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum BbbcStatus bbbc_model_centers(const struct BbbcClusterModel *model, double *out, size_t len);

/**
 * Copies the cluster index of every data point into `out`.
 *
 * # Safety
 * `out` must point to `len` writable values.
 */
enum BbbcStatus bbbc_model_assignments(const struct BbbcClusterModel *model,
                                       size_t *out,
                                       size_t len);

/**
 * # Safety
 * `costs` must point to `n` doubles and `out` must be valid.
 */
enum BbbcStatus bbbc_summarize(const double *costs, size_t n, struct BbbcRunSummary *out);

/**
 * Welch's unequal-variance t-test with a two-sided p-value.
 *
 * # Safety
 * `a` and `b` must point to `n_a` and `n_b` doubles.
 */
enum BbbcStatus bbbc_welch_t_test(const double *a,
                                  size_t n_a,
                                  const double *b,
                                  size_t n_b,
                                  struct BbbcTestResult *out);

/**
 * Friedman test over a row-major `blocks x treatments` score table.
 *
 * # Safety
 * `scores` must point to `blocks * treatments` doubles.
 */
enum BbbcStatus bbbc_friedman_test(const double *scores,
                                   size_t blocks,
                                   size_t treatments,
                                   struct BbbcTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BBBC_H */

#ifndef FVBNN_H
#define FVBNN_H

/*
 * C interface to the fvbnn library: Bayesian neural network regression with
 * function-value priors.
 *
 * Every function returns an fvbnn_status. On failure, fvbnn_last_error()
 * returns a description of the most recent error on the calling thread; the
 * pointer stays valid until the next failing call on that thread.
 *
 * Handles are opaque and must be released with the matching *_free
 * function. Passing NULL to a *_free function is a no-op.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FVBNN_BUILDING_LIBRARY)
#    define FVBNN_API __declspec(dllexport)
#  else
#    define FVBNN_API __declspec(dllimport)
#  endif
#else
#  define FVBNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fvbnn_status {
    FVBNN_OK = 0,
    FVBNN_ERR_CONFIG = 1,    /* invalid config or options */
    FVBNN_ERR_DATA = 2,      /* malformed, missing or inconsistent data */
    FVBNN_ERR_NUMERICAL = 3, /* divergence, non-finite values, failed factorization */
    FVBNN_ERR_INPUT = 4,     /* invalid argument (NULL pointer, bad length, ...) */
    FVBNN_ERR_IO = 5,        /* file could not be read or written */
    FVBNN_ERR_INTERNAL = 6   /* unexpected failure */
} fvbnn_status;

typedef struct fvbnn_model fvbnn_model;
typedef struct fvbnn_dataset fvbnn_dataset;

/* Overrides applied on top of a config file. Zero-initialize, then set the
 * fields you want: has_seed selects `seed`; a NULL backend keeps the config
 * value ("nn", "ensemble" or "laplace"); n_splits 0 keeps the config value. */
typedef struct fvbnn_options {
    int has_seed;
    uint64_t seed;
    const char* backend;
    size_t n_splits;
} fvbnn_options;

FVBNN_API const char* fvbnn_version(void);
FVBNN_API const char* fvbnn_last_error(void);
FVBNN_API const char* fvbnn_status_name(fvbnn_status status);

/* ---- commands (options may be NULL) ---- */

/* Train the configured backend and prior; writes a model directory. */
FVBNN_API fvbnn_status fvbnn_train(const char* config_path, const char* out_dir, const fvbnn_options* options);

/* Predictions and summary metrics of a model on a CSV following the model's
 * data schema; writes out_dir/predictions.csv and out_dir/metrics.csv. */
FVBNN_API fvbnn_status fvbnn_evaluate(const char* model_dir, const char* data_path, const char* out_dir);

/* Run every configured method on n_splits seeded splits; writes tables. */
FVBNN_API fvbnn_status fvbnn_compare(const char* config_path, const char* out_dir, const fvbnn_options* options);

/* Band CSV, training-point CSV and SVG for a model with one input feature. */
FVBNN_API fvbnn_status fvbnn_plot_1d(const char* model_dir, const char* out_prefix);

/* Generate the 1-D synthetic task, train and plot. config_path may be NULL
 * for the built-in demo config. */
FVBNN_API fvbnn_status fvbnn_synth_demo(const char* config_path, const char* out_dir,
                                        const fvbnn_options* options);

/* ---- models and datasets ---- */

FVBNN_API fvbnn_status fvbnn_model_load(const char* model_dir, fvbnn_model** out);
FVBNN_API void fvbnn_model_free(fvbnn_model* model);
FVBNN_API fvbnn_status fvbnn_model_noise_variance(const fvbnn_model* model, double* out);

/* Load a CSV using the column roles recorded in the model. */
FVBNN_API fvbnn_status fvbnn_dataset_load(const fvbnn_model* model, const char* csv_path, fvbnn_dataset** out);
FVBNN_API void fvbnn_dataset_free(fvbnn_dataset* dataset);
FVBNN_API size_t fvbnn_dataset_size(const fvbnn_dataset* dataset);

/* Posterior predictive per row. Each output array must hold `capacity` >=
 * fvbnn_dataset_size() doubles; any output pointer may be NULL. */
FVBNN_API fvbnn_status fvbnn_model_predict(const fvbnn_model* model, const fvbnn_dataset* dataset, double* mean,
                                           double* function_variance, double* total_variance, size_t capacity);

/* ---- primitives ---- */

/* Normalized product of N(bnn_mean, bnn_variance) and N(prior_mean,
 * prior_variance); prior_variance may be INFINITY (no prior). */
FVBNN_API fvbnn_status fvbnn_fuse(double bnn_mean, double bnn_variance, double prior_mean, double prior_variance,
                                  double* mean, double* variance);

/* One-sided Wilcoxon signed-rank test of H1: a - b shifted above zero. */
FVBNN_API fvbnn_status fvbnn_wilcoxon(const double* a, const double* b, size_t n, double* p_value, double* w_plus);

#ifdef __cplusplus
}
#endif

#endif /* FVBNN_H */

/* C interface to the bayeslista library. All functions return a bl_status;
 * on failure bl_last_error() describes the problem (per thread). Handles are
 * opaque and must be released with the matching destroy function. */
#ifndef BAYESLISTA_H
#define BAYESLISTA_H

#include <stddef.h>
#include <stdint.h>

#if defined(BL_BUILDING_LIBRARY)
#define BL_API __attribute__((visibility("default")))
#else
#define BL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bl_status {
  BL_OK = 0,
  BL_INVALID_ARGUMENT = 1,
  BL_CONFIG_ERROR = 2,
  BL_DATA_ERROR = 3,
  BL_NUMERIC_ERROR = 4
} bl_status;

BL_API const char* bl_version(void);

/* Message of the last failed call on this thread, "" if none. */
BL_API const char* bl_last_error(void);

/* ---- moment map ---- */

/* Spike-and-slab moments of h_lambda(x) for x ~ N(mean, var). */
BL_API bl_status bl_soft_threshold_gauss(double mean, double var, double lambda, double* omega,
                                         double* slab_mean, double* slab_var);

/* ---- datasets ---- */

typedef struct bl_dataset bl_dataset;

/* Synthetic sparse targets (n x dim), a standard Gaussian design (k x dim)
 * and observations y = X beta + noise. */
BL_API bl_status bl_dataset_generate(size_t n, size_t dim, size_t k, double spike_prob,
                                     double trunc, double noise_sd, uint64_t seed,
                                     bl_dataset** out);

/* First n images of an IDX file as targets; raw != 0 keeps 0..255 pixels. */
BL_API bl_status bl_dataset_from_mnist(const char* path, size_t n, size_t k, int raw,
                                       uint64_t seed, bl_dataset** out);

BL_API bl_status bl_dataset_load(const char* path, bl_dataset** out);
BL_API bl_status bl_dataset_save(const bl_dataset* ds, const char* path);
BL_API bl_status bl_dataset_shape(const bl_dataset* ds, size_t* n, size_t* dim, size_t* k);

/* Copies pair i into y (k values) and beta (dim values). */
BL_API bl_status bl_dataset_row(const bl_dataset* ds, size_t i, double* y, double* beta);
BL_API void bl_dataset_destroy(bl_dataset* ds);

/* ---- BayesLISTA model ---- */

typedef struct bl_model bl_model;

BL_API bl_status bl_model_create(size_t dim, size_t k, double lambda, int layers, uint64_t seed,
                                 bl_model** out);

/* Warm start from the ISTA weights of the dataset's design; weight
 * variances are var_scale / k and var_scale / dim. */
BL_API bl_status bl_model_create_warm(const bl_dataset* ds, double lambda, int layers,
                                      double var_scale, bl_model** out);

/* Selects the product-moment rule used by train and predict. */
BL_API bl_status bl_model_set_exact_moments(bl_model* m, int exact);

BL_API bl_status bl_model_train(bl_model* m, const bl_dataset* ds, int epochs, uint64_t seed);

/* Predictive mean and variance (dim values each) for one observation y. */
BL_API bl_status bl_model_predict(const bl_model* m, const double* y, double* mean, double* var);
BL_API void bl_model_destroy(bl_model* m);

/* ---- experiments ---- */

typedef struct bl_config bl_config;
typedef struct bl_records bl_records;

/* experiment: "layers-sweep", "k-sweep", "mnist" or "active". */
BL_API bl_status bl_config_create(const char* experiment, bl_config** out);

/* Options use their command-line names without the leading dashes, e.g.
 * ("layers", "1,2,4"), ("seeds", "0..4"), ("exact-moments", "1"). */
BL_API bl_status bl_config_set(bl_config* cfg, const char* key, const char* value);
BL_API void bl_config_destroy(bl_config* cfg);

BL_API bl_status bl_run(const bl_config* cfg, bl_records** out);

typedef struct bl_record {
  const char* experiment;
  const char* algorithm;
  int layers;
  int k;
  uint64_t seed;
  int round;            /* -1 when absent */
  const char* strategy; /* "" when absent */
  double nmse;
  double wall_ms;
} bl_record;

BL_API size_t bl_records_size(const bl_records* r);

/* String fields stay valid until the records are destroyed. */
BL_API bl_status bl_records_get(const bl_records* r, size_t i, bl_record* out);

/* path "-" writes to standard output. */
BL_API bl_status bl_records_write_csv(const bl_records* r, const char* path, int nmse_db);
BL_API void bl_records_destroy(bl_records* r);

#ifdef __cplusplus
}
#endif

#endif /* BAYESLISTA_H */

/* C interface to the hgmd engine. All handles are opaque; every fallible
 * call returns an hgmd_status and, on failure, sets a thread-local message
 * readable through hgmd_last_error(). Strings returned through char** are
 * owned by the caller and released with hgmd_string_free(). */
#ifndef HGMD_H
#define HGMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(HGMD_BUILDING_LIBRARY)
#define HGMD_API __attribute__((visibility("default")))
#else
#define HGMD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hgmd_status {
  HGMD_OK = 0,
  HGMD_ERR_INTERNAL = 1,
  HGMD_ERR_CONFIG = 2,
  HGMD_ERR_NUMERIC = 3,
  HGMD_ERR_INVALID_ARGUMENT = 4,
  HGMD_ERR_IO = 5
} hgmd_status;

typedef struct hgmd_dataset hgmd_dataset;
typedef struct hgmd_checkpoint hgmd_checkpoint;
typedef struct hgmd_config hgmd_config;

typedef struct hgmd_dataset_info {
  uint32_t num_nodes;
  uint32_t feature_dim;
  uint32_t num_classes;
  uint64_t num_edges; /* undirected */
  uint32_t train_size;
  uint32_t val_size;
  uint32_t test_size;
  uint64_t duplicate_edges;
} hgmd_dataset_info;

typedef struct hgmd_sbm_params {
  uint32_t blocks;
  uint32_t nodes_per_block;
  double p_in;
  double p_out;
  uint32_t feature_dim;
  double noise_std;
  uint64_t seed;
} hgmd_sbm_params;

typedef struct hgmd_accuracy {
  double train;
  double val;
  double test;
} hgmd_accuracy;

HGMD_API const char* hgmd_version(void);
/* Message of the last failure on this thread; "" when none. */
HGMD_API const char* hgmd_last_error(void);
HGMD_API void hgmd_string_free(char* s);

/* Defaults for hgmd_sbm_params. */
HGMD_API void hgmd_sbm_params_default(hgmd_sbm_params* params);

HGMD_API hgmd_status hgmd_dataset_load(const char* dir, hgmd_dataset** out);
HGMD_API hgmd_status hgmd_dataset_generate_sbm(const hgmd_sbm_params* params, hgmd_dataset** out);
HGMD_API hgmd_status hgmd_dataset_write(const hgmd_dataset* ds, const char* dir);
HGMD_API hgmd_status hgmd_dataset_info_get(const hgmd_dataset* ds, hgmd_dataset_info* info);
HGMD_API void hgmd_dataset_free(hgmd_dataset* ds);

HGMD_API hgmd_status hgmd_checkpoint_load(const char* path, hgmd_checkpoint** out);
HGMD_API hgmd_status hgmd_checkpoint_shape(const hgmd_checkpoint* ckpt, uint32_t* num_nodes,
                                           uint32_t* num_classes, double* val_acc);
/* Copies the N*C row-major logits; capacity is in doubles. */
HGMD_API hgmd_status hgmd_checkpoint_logits(const hgmd_checkpoint* ckpt, double* out, size_t capacity);
HGMD_API void hgmd_checkpoint_free(hgmd_checkpoint* ckpt);

/* Loads and validates a run configuration file. */
HGMD_API hgmd_status hgmd_config_load(const char* path, hgmd_config** out);
/* Configuration with every default materialized, as JSON. */
HGMD_API hgmd_status hgmd_config_echo(const hgmd_config* config, char** json_out);
HGMD_API void hgmd_config_free(hgmd_config* config);

/* Commands. summary_json may be NULL. */
HGMD_API hgmd_status hgmd_train_teacher(const hgmd_config* config, char** summary_json);
/* schemes: comma-separated names, "all", or NULL for the configured scheme. */
HGMD_API hgmd_status hgmd_distill(const hgmd_config* config, const char* schemes, char** summary_json);
HGMD_API hgmd_status hgmd_eval(const char* model_path, const hgmd_dataset* ds, hgmd_accuracy* out);

/* kind: "buckets", "asymmetry", "hist3d" or "hardness". options_json may be
 * NULL; "hardness" accepts {"scheme": name, "seed": n, "invariant": bool}. */
HGMD_API hgmd_status hgmd_report(const char* kind, const char* run_dir, const char* options_json, char** text_out);

#ifdef __cplusplus
}
#endif

#endif /* HGMD_H */

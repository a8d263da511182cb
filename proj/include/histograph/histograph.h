/*
 * histograph C API.
 *
 * Opaque handles own their objects; every *_free accepts NULL.  Functions
 * returning hg_status leave a human-readable message for the calling thread
 * in hg_last_error() when they fail.
 */
#ifndef HISTOGRAPH_H
#define HISTOGRAPH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HISTOGRAPH_BUILDING)
#    define HG_API __declspec(dllexport)
#  else
#    define HG_API __declspec(dllimport)
#  endif
#else
#  define HG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hg_status {
  HG_OK = 0,
  HG_ERR_VALIDATION = 1,
  HG_ERR_EMPTY_INPUT = 2,
  HG_ERR_SHAPE = 3,
  HG_ERR_BOUNDS = 4,
  HG_ERR_NUMERIC = 5,
  HG_ERR_STATE = 6,
  HG_ERR_IO = 7,
  HG_ERR_VERSION = 8,
  HG_ERR_CORRUPT = 9,
  HG_ERR_UNSUPPORTED = 10,
  HG_ERR_INVALID_ARGUMENT = 11,
  HG_ERR_INTERNAL = 12
} hg_status;

typedef struct hg_graph hg_graph;
typedef struct hg_dataset hg_dataset;
typedef struct hg_model hg_model;
typedef struct hg_importance hg_importance;

HG_API const char* hg_version(void);
HG_API const char* hg_status_name(hg_status status);
HG_API const char* hg_last_error(void);
HG_API void hg_string_free(char* s);

/* ---- graphs ------------------------------------------------------------ */

/* features: comma list of one,x,y,degree, or NULL / "default" for one,degree. */
HG_API hg_status hg_graph_from_csv(const char* csv_path, double threshold, const char* features, hg_graph** out);
HG_API hg_status hg_graph_load(const char* json_path, hg_graph** out);
HG_API hg_status hg_graph_save(const hg_graph* graph, const char* json_path);
HG_API size_t hg_graph_node_count(const hg_graph* graph);
HG_API size_t hg_graph_feature_count(const hg_graph* graph);

typedef struct hg_graph_stats {
  size_t nodes;
  size_t edges;
  double mean_degree;
  double mean_edge_weight;
} hg_graph_stats;

HG_API hg_status hg_graph_get_stats(const hg_graph* graph, hg_graph_stats* out);
HG_API hg_status hg_graph_occlude(const hg_graph* graph, size_t center, size_t hops, hg_graph** out);
HG_API void hg_graph_free(hg_graph* graph);

/* ---- datasets ---------------------------------------------------------- */

/* Manifest: CSV "path,label"; paths relative to the manifest.  .json entries
 * are graph files, anything else a centroid CSV built with threshold/features. */
HG_API hg_status hg_dataset_load(const char* manifest_path, double threshold, const char* features,
                                 hg_dataset** out);
HG_API size_t hg_dataset_size(const hg_dataset* dataset);
/* Vertex feature width shared by every graph (0 for an empty set). */
HG_API size_t hg_dataset_feature_count(const hg_dataset* dataset);
/* 1 + the largest label (0 when unlabelled). */
HG_API size_t hg_dataset_class_count(const hg_dataset* dataset);
HG_API void hg_dataset_free(hg_dataset* dataset);

/* ---- synthetic benchmark ---------------------------------------------- */

typedef struct hg_synth_config {
  const char* classes; /* comma list of ring,scatter; position = label */
  size_t count_per_class;
  uint64_t seed;
  size_t min_nuclei;
  size_t max_nuclei;
  double ring_radius;
  double ring_jitter;
  double field_size;
  double ring_fraction;
} hg_synth_config;

HG_API void hg_synth_config_default(hg_synth_config* config);
HG_API hg_status hg_synth_write(const hg_synth_config* config, const char* out_dir, size_t* files_written);

/* ---- models ------------------------------------------------------------ */

typedef enum hg_variant { HG_VARIANT_RSF = 0, HG_VARIANT_RSF_EDGE = 1, HG_VARIANT_RSF_ATTENTION = 2 } hg_variant;

HG_API hg_status hg_variant_parse(const char* name, hg_variant* out);
HG_API hg_status hg_model_create(hg_variant variant, size_t input_features, size_t n_classes, uint64_t seed,
                                 hg_model** out);
HG_API hg_status hg_model_load(const char* checkpoint_path, hg_model** out);
HG_API hg_status hg_model_save(const hg_model* model, const char* checkpoint_path);
HG_API size_t hg_model_parameter_count(const hg_model* model);
HG_API hg_variant hg_model_variant(const hg_model* model);
HG_API void hg_model_free(hg_model* model);

typedef struct hg_train_config {
  size_t epochs;
  double learning_rate;
  uint64_t shuffle_seed;
} hg_train_config;

typedef void (*hg_epoch_callback)(size_t epoch, double mean_loss, void* user);

HG_API void hg_train_config_default(hg_train_config* config);
HG_API hg_status hg_model_train(hg_model* model, const hg_dataset* dataset, const hg_train_config* config,
                                hg_epoch_callback on_epoch, void* user);

/* report_json (optional) receives the full report; release with hg_string_free. */
HG_API hg_status hg_model_evaluate(const hg_model* model, const hg_dataset* dataset, unsigned threads,
                                   double* accuracy, char** report_json);
/* n_classes (optional) always receives the class count; probabilities may be
 * NULL to query it.  A buffer smaller than the class count is HG_ERR_BOUNDS. */
HG_API hg_status hg_model_predict(const hg_model* model, const hg_graph* graph, double* probabilities,
                                  size_t capacity, size_t* n_classes);

/* ---- importance maps --------------------------------------------------- */

typedef enum hg_method { HG_METHOD_OCCLUSION = 0, HG_METHOD_ATTENTION = 1 } hg_method;

HG_API hg_status hg_method_parse(const char* name, hg_method* out);
/* threads = 0 uses the hardware concurrency; hops is ignored for attention. */
HG_API hg_status hg_explain(const hg_model* model, const hg_graph* graph, hg_method method, size_t hops,
                            unsigned threads, hg_importance** out);
HG_API size_t hg_importance_size(const hg_importance* map);
HG_API size_t hg_importance_target_class(const hg_importance* map);
/* Either buffer may be NULL; non-NULL buffers need capacity >= size. */
HG_API hg_status hg_importance_scores(const hg_importance* map, double* raw, double* normalized, size_t capacity);
/* CSV node_id,x,y,raw_score,normalized_score with 17 significant digits. */
HG_API hg_status hg_importance_export(const hg_importance* map, const hg_graph* graph, const char* csv_path);
HG_API void hg_importance_free(hg_importance* map);

/* ---- rendering --------------------------------------------------------- */

typedef struct hg_render_config {
  double node_radius;
  double margin;
  int legend;
} hg_render_config;

HG_API void hg_render_config_default(hg_render_config* config);
HG_API hg_status hg_render_svg(const hg_graph* graph, const char* scores_csv, const hg_render_config* config,
                               const char* svg_path);

#ifdef __cplusplus
}
#endif

#endif /* HISTOGRAPH_H */

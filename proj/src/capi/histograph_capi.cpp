#include "histograph/histograph.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>

#include "cli/render.hpp"
#include "cli/synth.hpp"
#include "core/error.hpp"
#include "explain/explain.hpp"
#include "graph/graph.hpp"
#include "model/model.hpp"

struct hg_graph {
  histograph::graph::NucleusGraph graph;
};

struct hg_dataset {
  std::vector<histograph::graph::NucleusGraph> graphs;
};

struct hg_model {
  histograph::model::Model model;
  histograph::model::TrainMeta meta;
};

struct hg_importance {
  histograph::explain::ImportanceMap map;
};

namespace {

using histograph::Error;
using histograph::ErrorKind;

thread_local std::string g_last_error;

hg_status to_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return HG_ERR_VALIDATION;
    case ErrorKind::EmptyInput: return HG_ERR_EMPTY_INPUT;
    case ErrorKind::Shape: return HG_ERR_SHAPE;
    case ErrorKind::Bounds: return HG_ERR_BOUNDS;
    case ErrorKind::Numeric: return HG_ERR_NUMERIC;
    case ErrorKind::State: return HG_ERR_STATE;
    case ErrorKind::Io: return HG_ERR_IO;
    case ErrorKind::Version: return HG_ERR_VERSION;
    case ErrorKind::Corrupt: return HG_ERR_CORRUPT;
    case ErrorKind::Unsupported: return HG_ERR_UNSUPPORTED;
  }
  return HG_ERR_INTERNAL;
}

template <typename Fn>
hg_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HG_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return HG_ERR_INTERNAL;
}

hg_status invalid(const char* what) {
  g_last_error = what;
  return HG_ERR_INVALID_ARGUMENT;
}

histograph::graph::GraphBuildConfig build_config(double threshold, const char* features) {
  histograph::graph::GraphBuildConfig cfg;
  cfg.distance_threshold = threshold;
  cfg.features = histograph::graph::parse_feature_recipe(features ? features : "default");
  return cfg;
}

histograph::model::Variant to_variant(hg_variant v) {
  switch (v) {
    case HG_VARIANT_RSF: return histograph::model::Variant::Rsf;
    case HG_VARIANT_RSF_EDGE: return histograph::model::Variant::RsfEdge;
    case HG_VARIANT_RSF_ATTENTION: return histograph::model::Variant::RsfAttention;
  }
  histograph::fail(ErrorKind::Validation, "unknown variant code");
}

hg_variant from_variant(histograph::model::Variant v) {
  switch (v) {
    case histograph::model::Variant::Rsf: return HG_VARIANT_RSF;
    case histograph::model::Variant::RsfEdge: return HG_VARIANT_RSF_EDGE;
    case histograph::model::Variant::RsfAttention: return HG_VARIANT_RSF_ATTENTION;
  }
  return HG_VARIANT_RSF;
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* hg_version(void) { return "1.0.0"; }

const char* hg_status_name(hg_status status) {
  switch (status) {
    case HG_OK: return "ok";
    case HG_ERR_VALIDATION: return "validation error";
    case HG_ERR_EMPTY_INPUT: return "empty input";
    case HG_ERR_SHAPE: return "shape error";
    case HG_ERR_BOUNDS: return "bounds error";
    case HG_ERR_NUMERIC: return "numeric failure";
    case HG_ERR_STATE: return "state error";
    case HG_ERR_IO: return "I/O error";
    case HG_ERR_VERSION: return "version error";
    case HG_ERR_CORRUPT: return "corrupt file";
    case HG_ERR_UNSUPPORTED: return "unsupported";
    case HG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* hg_last_error(void) { return g_last_error.c_str(); }

void hg_string_free(char* s) { delete[] s; }

hg_status hg_graph_from_csv(const char* csv_path, double threshold, const char* features, hg_graph** out) {
  if (!csv_path || !out) return invalid("hg_graph_from_csv: null argument");
  return guarded([&] {
    const auto records = histograph::graph::read_centroids_csv(csv_path);
    *out = new hg_graph{histograph::graph::build_graph(records, build_config(threshold, features))};
  });
}

hg_status hg_graph_load(const char* json_path, hg_graph** out) {
  if (!json_path || !out) return invalid("hg_graph_load: null argument");
  return guarded([&] { *out = new hg_graph{histograph::graph::load_graph(json_path)}; });
}

hg_status hg_graph_save(const hg_graph* graph, const char* json_path) {
  if (!graph || !json_path) return invalid("hg_graph_save: null argument");
  return guarded([&] { histograph::graph::save_graph(graph->graph, json_path); });
}

size_t hg_graph_node_count(const hg_graph* graph) { return graph ? graph->graph.n : 0; }

size_t hg_graph_feature_count(const hg_graph* graph) { return graph ? graph->graph.feature_count() : 0; }

hg_status hg_graph_get_stats(const hg_graph* graph, hg_graph_stats* out) {
  if (!graph || !out) return invalid("hg_graph_get_stats: null argument");
  return guarded([&] {
    const auto s = histograph::graph::graph_stats(graph->graph);
    *out = hg_graph_stats{s.nodes, s.edges, s.mean_degree, s.mean_edge_weight};
  });
}

hg_status hg_graph_occlude(const hg_graph* graph, size_t center, size_t hops, hg_graph** out) {
  if (!graph || !out) return invalid("hg_graph_occlude: null argument");
  return guarded([&] { *out = new hg_graph{histograph::graph::occlude(graph->graph, center, hops)}; });
}

void hg_graph_free(hg_graph* graph) { delete graph; }

hg_status hg_dataset_load(const char* manifest_path, double threshold, const char* features, hg_dataset** out) {
  if (!manifest_path || !out) return invalid("hg_dataset_load: null argument");
  return guarded([&] {
    *out = new hg_dataset{histograph::cli::load_dataset(manifest_path, build_config(threshold, features))};
  });
}

size_t hg_dataset_size(const hg_dataset* dataset) { return dataset ? dataset->graphs.size() : 0; }

size_t hg_dataset_feature_count(const hg_dataset* dataset) {
  return dataset && !dataset->graphs.empty() ? dataset->graphs.front().feature_count() : 0;
}

size_t hg_dataset_class_count(const hg_dataset* dataset) {
  if (!dataset) return 0;
  int top = -1;
  for (const auto& g : dataset->graphs) {
    if (g.label) top = std::max(top, *g.label);
  }
  return static_cast<size_t>(top + 1);
}

void hg_dataset_free(hg_dataset* dataset) { delete dataset; }

void hg_synth_config_default(hg_synth_config* config) {
  if (!config) return;
  const histograph::cli::SyntheticConfig shape;
  *config = hg_synth_config{"ring,scatter",     1,
                            0,                  shape.min_nuclei,
                            shape.max_nuclei,   shape.ring_radius,
                            shape.ring_jitter,  shape.field_size,
                            shape.ring_fraction};
}

hg_status hg_synth_write(const hg_synth_config* config, const char* out_dir, size_t* files_written) {
  if (!config || !out_dir) return invalid("hg_synth_write: null argument");
  return guarded([&] {
    histograph::cli::SynthSetConfig set;
    set.classes.clear();
    const std::string classes = config->classes ? config->classes : "ring,scatter";
    std::size_t pos = 0;
    while (pos <= classes.size()) {
      const std::size_t comma = std::min(classes.find(',', pos), classes.size());
      set.classes.push_back(histograph::cli::parse_synth_class(classes.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    set.count_per_class = config->count_per_class;
    set.seed = config->seed;
    set.shape.min_nuclei = config->min_nuclei;
    set.shape.max_nuclei = config->max_nuclei;
    set.shape.ring_radius = config->ring_radius;
    set.shape.ring_jitter = config->ring_jitter;
    set.shape.field_size = config->field_size;
    set.shape.ring_fraction = config->ring_fraction;
    const auto entries = histograph::cli::write_synthetic_set(out_dir, set);
    if (files_written) *files_written = entries.size() + 1;
  });
}

hg_status hg_variant_parse(const char* name, hg_variant* out) {
  if (!name || !out) return invalid("hg_variant_parse: null argument");
  return guarded([&] { *out = from_variant(histograph::model::parse_variant(name)); });
}

hg_status hg_model_create(hg_variant variant, size_t input_features, size_t n_classes, uint64_t seed,
                          hg_model** out) {
  if (!out) return invalid("hg_model_create: null argument");
  if (variant < HG_VARIANT_RSF || variant > HG_VARIANT_RSF_ATTENTION) return invalid("hg_model_create: unknown variant");
  return guarded([&] {
    histograph::model::ModelSpec spec;
    spec.variant = to_variant(variant);
    spec.input_features = input_features;
    spec.n_classes = n_classes;
    spec.seed = seed;
    *out = new hg_model{histograph::model::Model(spec), {}};
  });
}

hg_status hg_model_load(const char* checkpoint_path, hg_model** out) {
  if (!checkpoint_path || !out) return invalid("hg_model_load: null argument");
  return guarded([&] {
    const auto c = histograph::model::load_checkpoint(checkpoint_path);
    *out = new hg_model{histograph::model::model_from_checkpoint(c), c.meta};
  });
}

hg_status hg_model_save(const hg_model* model, const char* checkpoint_path) {
  if (!model || !checkpoint_path) return invalid("hg_model_save: null argument");
  return guarded([&] {
    histograph::model::save_checkpoint(histograph::model::make_checkpoint(model->model, model->meta), checkpoint_path);
  });
}

size_t hg_model_parameter_count(const hg_model* model) { return model ? model->model.parameter_count() : 0; }

hg_variant hg_model_variant(const hg_model* model) {
  return model ? from_variant(model->model.spec().variant) : HG_VARIANT_RSF;
}

void hg_model_free(hg_model* model) { delete model; }

void hg_train_config_default(hg_train_config* config) {
  if (!config) return;
  const histograph::model::TrainConfig defaults;
  *config = hg_train_config{defaults.epochs, defaults.learning_rate, defaults.shuffle_seed};
}

hg_status hg_model_train(hg_model* model, const hg_dataset* dataset, const hg_train_config* config,
                         hg_epoch_callback on_epoch, void* user) {
  if (!model || !dataset || !config) return invalid("hg_model_train: null argument");
  return guarded([&] {
    histograph::model::TrainConfig cfg{config->epochs, config->learning_rate, config->shuffle_seed};
    histograph::model::EpochCallback cb;
    if (on_epoch) cb = [on_epoch, user](std::size_t epoch, double loss) { on_epoch(epoch, loss, user); };
    auto result = histograph::model::train(model->model, dataset->graphs, cfg, cb);
    model->meta = result.checkpoint.meta;
  });
}

hg_status hg_model_evaluate(const hg_model* model, const hg_dataset* dataset, unsigned threads, double* accuracy,
                            char** report_json) {
  if (!model || !dataset) return invalid("hg_model_evaluate: null argument");
  return guarded([&] {
    const auto report = histograph::model::evaluate(model->model, dataset->graphs, threads);
    if (accuracy) *accuracy = report.accuracy;
    if (report_json) *report_json = copy_string(histograph::model::eval_report_to_json(report));
  });
}

hg_status hg_model_predict(const hg_model* model, const hg_graph* graph, double* probabilities, size_t capacity,
                           size_t* n_classes) {
  if (!model || !graph) return invalid("hg_model_predict: null argument");
  return guarded([&] {
    const auto p = model->model.predict(graph->graph);
    if (n_classes) *n_classes = p.probabilities.size();
    if (!probabilities) return;
    if (capacity < p.probabilities.size()) {
      histograph::fail(histograph::ErrorKind::Bounds, "probability buffer holds " + std::to_string(capacity) +
                                                          " values, need " + std::to_string(p.probabilities.size()));
    }
    std::copy(p.probabilities.begin(), p.probabilities.end(), probabilities);
  });
}

hg_status hg_method_parse(const char* name, hg_method* out) {
  if (!name || !out) return invalid("hg_method_parse: null argument");
  const std::string s = name;
  if (s == "occlusion") *out = HG_METHOD_OCCLUSION;
  else if (s == "attention") *out = HG_METHOD_ATTENTION;
  else {
    g_last_error = "unknown method '" + s + "' (expected occlusion or attention)";
    return HG_ERR_VALIDATION;
  }
  return HG_OK;
}

hg_status hg_explain(const hg_model* model, const hg_graph* graph, hg_method method, size_t hops, unsigned threads,
                     hg_importance** out) {
  if (!model || !graph || !out) return invalid("hg_explain: null argument");
  return guarded([&] {
    auto map = method == HG_METHOD_ATTENTION
                   ? histograph::explain::attention_scores(model->model, graph->graph)
                   : histograph::explain::occlusion_scores(model->model, graph->graph, hops, threads);
    *out = new hg_importance{std::move(map)};
  });
}

size_t hg_importance_size(const hg_importance* map) { return map ? map->map.raw.size() : 0; }

size_t hg_importance_target_class(const hg_importance* map) { return map ? map->map.target_class : 0; }

hg_status hg_importance_scores(const hg_importance* map, double* raw, double* normalized, size_t capacity) {
  if (!map) return invalid("hg_importance_scores: null argument");
  return guarded([&] {
    const std::size_t n = map->map.raw.size();
    if ((raw || normalized) && capacity < n) {
      histograph::fail(histograph::ErrorKind::Bounds,
                       "score buffer holds " + std::to_string(capacity) + " values, need " + std::to_string(n));
    }
    if (raw) std::copy(map->map.raw.begin(), map->map.raw.end(), raw);
    if (normalized) std::copy(map->map.normalized.begin(), map->map.normalized.end(), normalized);
  });
}

hg_status hg_importance_export(const hg_importance* map, const hg_graph* graph, const char* csv_path) {
  if (!map || !graph || !csv_path) return invalid("hg_importance_export: null argument");
  return guarded([&] { histograph::explain::export_scores(map->map, graph->graph, csv_path); });
}

void hg_importance_free(hg_importance* map) { delete map; }

void hg_render_config_default(hg_render_config* config) {
  if (!config) return;
  const histograph::cli::RenderConfig defaults;
  *config = hg_render_config{defaults.node_radius, defaults.margin, defaults.legend ? 1 : 0};
}

hg_status hg_render_svg(const hg_graph* graph, const char* scores_csv, const hg_render_config* config,
                        const char* svg_path) {
  if (!graph || !scores_csv || !svg_path) return invalid("hg_render_svg: null argument");
  return guarded([&] {
    histograph::cli::RenderConfig cfg;
    if (config) cfg = {config->node_radius, config->margin, config->legend != 0};
    const auto rows = histograph::explain::read_scores_csv(scores_csv);
    std::vector<double> normalized;
    normalized.reserve(rows.size());
    for (const auto& r : rows) normalized.push_back(r.normalized);
    const std::string svg = histograph::cli::render_svg(graph->graph, normalized, cfg);
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) histograph::fail(ErrorKind::Io, std::string("cannot write ") + svg_path);
    out << svg;
    if (!out) histograph::fail(ErrorKind::Io, std::string("write failed for ") + svg_path);
  });
}

}  // extern "C"

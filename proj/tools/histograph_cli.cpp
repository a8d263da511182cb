// histograph command-line front end.  Everything goes through the C API.
//
// Exit codes: 0 ok, 2 validation/usage, 3 numeric failure, 4 I/O, 1 internal.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "histograph/histograph.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int exit_code(hg_status s) {
  switch (s) {
    case HG_OK: return kExitOk;
    case HG_ERR_NUMERIC: return kExitNumeric;
    case HG_ERR_IO: return kExitIo;
    case HG_ERR_INTERNAL: return kExitInternal;
    default: return kExitUsage;
  }
}

// Thrown out of a subcommand after the message has been printed.
struct Exit {
  int code;
};

void check(hg_status s) {
  if (s == HG_OK) return;
  std::cerr << "error: " << hg_last_error() << '\n';
  throw Exit{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& what) {
  std::cerr << "error: " << what << '\n';
  throw Exit{kExitUsage};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Graph = Handle<hg_graph, hg_graph_free>;
using Dataset = Handle<hg_dataset, hg_dataset_free>;
using ModelHandle = Handle<hg_model, hg_model_free>;
using Importance = Handle<hg_importance, hg_importance_free>;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("HISTOGRAPH_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    usage_error(std::string("HISTOGRAPH_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Graph inputs may be interchange JSON or raw centroid CSVs.
void open_graph(Graph& g, const std::string& path, double threshold, const std::string& features) {
  if (ends_with(path, ".json")) check(hg_graph_load(path.c_str(), g.out()));
  else check(hg_graph_from_csv(path.c_str(), threshold, features.c_str(), g.out()));
}

struct GraphFlags {
  double threshold = 100.0;
  std::string features = "default";

  void add(CLI::App* cmd) {
    cmd->add_option("--threshold", threshold, "Distance threshold in pixels")->capture_default_str();
    cmd->add_option("--features", features, "Feature recipe: default or a comma list of one,x,y,degree")
        ->capture_default_str();
  }
};

int cmd_build_graph(const std::string& input, const std::string& output, const GraphFlags& gf) {
  Graph g;
  check(hg_graph_from_csv(input.c_str(), gf.threshold, gf.features.c_str(), g.out()));
  check(hg_graph_save(g.get(), output.c_str()));
  hg_graph_stats s{};
  check(hg_graph_get_stats(g.get(), &s));
  std::cout << "nodes " << s.nodes << ", edges " << s.edges << ", mean degree " << s.mean_degree << '\n';
  return kExitOk;
}

int cmd_synth(const std::string& classes, std::size_t count, const std::string& out_dir, std::uint64_t seed) {
  if (count < 1) usage_error("--count-per-class must be at least 1");
  hg_synth_config cfg;
  hg_synth_config_default(&cfg);
  cfg.classes = classes.c_str();
  cfg.count_per_class = count;
  cfg.seed = seed;
  std::size_t files = 0;
  check(hg_synth_write(&cfg, out_dir.c_str(), &files));
  std::cout << "wrote " << files << " files to " << out_dir << '\n';
  return kExitOk;
}

void print_epoch(std::size_t epoch, double loss, void*) {
  std::printf("epoch %zu loss %.6f\n", epoch, loss);
  std::fflush(stdout);
}

int cmd_train(const std::string& manifest, const std::string& variant_name, std::size_t epochs, double lr,
              std::uint64_t seed, const std::string& out, const GraphFlags& gf) {
  if (epochs < 1) usage_error("--epochs must be at least 1");
  hg_variant variant;
  check(hg_variant_parse(variant_name.c_str(), &variant));
  Dataset data;
  check(hg_dataset_load(manifest.c_str(), gf.threshold, gf.features.c_str(), data.out()));
  if (hg_dataset_size(data.get()) == 0) usage_error("manifest lists no graphs");

  // At least two classes even when the labels seen are all 0, so that
  // train() reports the single-class set rather than a shape error.
  const std::size_t n_classes = std::max<std::size_t>(2, hg_dataset_class_count(data.get()));
  ModelHandle model;
  check(hg_model_create(variant, hg_dataset_feature_count(data.get()), n_classes, seed, model.out()));
  std::cout << "variant " << variant_name << ", " << hg_model_parameter_count(model.get()) << " parameters, "
            << hg_dataset_size(data.get()) << " graphs\n";

  hg_train_config cfg;
  hg_train_config_default(&cfg);
  cfg.epochs = epochs;
  cfg.learning_rate = lr;
  cfg.shuffle_seed = seed;
  check(hg_model_train(model.get(), data.get(), &cfg, print_epoch, nullptr));
  check(hg_model_save(model.get(), out.c_str()));
  double accuracy = 0.0;
  char* report = nullptr;
  check(hg_model_evaluate(model.get(), data.get(), 0, &accuracy, &report));
  hg_string_free(report);
  std::printf("final train accuracy %.4f\n", accuracy);
  return kExitOk;
}

int cmd_eval(const std::string& manifest, const std::string& checkpoint, unsigned threads, const GraphFlags& gf) {
  ModelHandle model;
  check(hg_model_load(checkpoint.c_str(), model.out()));
  Dataset data;
  check(hg_dataset_load(manifest.c_str(), gf.threshold, gf.features.c_str(), data.out()));
  double accuracy = 0.0;
  char* report = nullptr;
  check(hg_model_evaluate(model.get(), data.get(), threads, &accuracy, &report));
  std::cout << report << '\n';
  hg_string_free(report);
  return kExitOk;
}

int cmd_explain(const std::string& graph_path, const std::string& checkpoint, const std::string& method_name,
                std::size_t hops, unsigned threads, const std::string& out, const GraphFlags& gf) {
  hg_method method;
  check(hg_method_parse(method_name.c_str(), &method));
  ModelHandle model;
  check(hg_model_load(checkpoint.c_str(), model.out()));
  Graph g;
  open_graph(g, graph_path, gf.threshold, gf.features);
  Importance map;
  check(hg_explain(model.get(), g.get(), method, hops, threads, map.out()));
  check(hg_importance_export(map.get(), g.get(), out.c_str()));
  std::cout << "wrote " << hg_importance_size(map.get()) << " scores (target class "
            << hg_importance_target_class(map.get()) << ") to " << out << '\n';
  return kExitOk;
}

hg_render_config read_render_config(const std::string& path) {
  hg_render_config cfg;
  hg_render_config_default(&cfg);
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << '\n';
    throw Exit{kExitIo};
  }
  try {
    const auto j = nlohmann::json::parse(in);
    if (!j.is_object()) usage_error("render config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "node_radius") cfg.node_radius = value.get<double>();
      else if (key == "margin") cfg.margin = value.get<double>();
      else if (key == "legend") cfg.legend = value.get<bool>() ? 1 : 0;
      else usage_error("unknown render config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    usage_error(std::string("render config: ") + e.what());
  }
  return cfg;
}

int cmd_render(const std::string& graph_path, const std::string& scores, const std::string& out,
               const std::string& config_path, const GraphFlags& gf) {
  const hg_render_config cfg = read_render_config(config_path);
  Graph g;
  open_graph(g, graph_path, gf.threshold, gf.features);
  check(hg_render_svg(g.get(), scores.c_str(), &cfg, out.c_str()));
  std::cout << "wrote " << out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolution classifiers and importance maps for nucleus graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hg_version()));

  GraphFlags graph_flags;

  std::string input, output;
  auto* build = app.add_subcommand("build-graph", "Build a weighted nucleus graph from a centroid CSV");
  build->add_option("--input", input, "Centroid CSV (id,x,y)")->required();
  build->add_option("--output", output, "Graph JSON to write")->required();
  graph_flags.add(build);

  std::string classes = "ring,scatter", out_dir;
  std::size_t count_per_class = 100;
  std::optional<std::uint64_t> seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic ring-vs-scatter centroid set");
  synth->add_option("--classes", classes, "Comma list of ring,scatter; order gives the label")->capture_default_str();
  synth->add_option("--count-per-class", count_per_class, "Samples per class")->capture_default_str();
  synth->add_option("--out-dir", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Seed (falls back to HISTOGRAPH_SEED, then 0)");

  std::string manifest, variant = "rsf", checkpoint_out;
  std::size_t epochs = 50;
  double lr = 0.01;
  auto* train = app.add_subcommand("train", "Train a classifier on a manifest of labelled graphs");
  train->add_option("--manifest", manifest, "CSV path,label")->required();
  train->add_option("--variant", variant, "rsf, rsf-edge or rsf-attention")->capture_default_str();
  train->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
  train->add_option("--seed", seed, "Seed (falls back to HISTOGRAPH_SEED, then 0)");
  train->add_option("--out", checkpoint_out, "Checkpoint JSON to write")->required();
  graph_flags.add(train);

  std::string checkpoint;
  unsigned threads = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints a JSON report");
  eval->add_option("--manifest", manifest, "CSV path,label")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  graph_flags.add(eval);

  std::string graph_path, method = "occlusion", scores_out;
  std::size_t hops = 1;
  auto* explain = app.add_subcommand("explain", "Per-node importance scores for one graph");
  explain->add_option("--graph", graph_path, "Graph JSON or centroid CSV")->required();
  explain->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  explain->add_option("--method", method, "occlusion or attention")->capture_default_str();
  explain->add_option("--hops", hops, "Occlusion neighbourhood radius")->capture_default_str();
  explain->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  explain->add_option("--out", scores_out, "Score CSV to write")->required();
  graph_flags.add(explain);

  std::string scores_in, svg_out, render_config;
  auto* render = app.add_subcommand("render", "Render an importance map as SVG");
  render->add_option("--graph", graph_path, "Graph JSON or centroid CSV")->required();
  render->add_option("--scores", scores_in, "Score CSV from explain")->required();
  render->add_option("--out", svg_out, "SVG to write")->required();
  render->add_option("--config", render_config, "JSON with node_radius, margin, legend");
  graph_flags.add(render);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*build) return cmd_build_graph(input, output, graph_flags);
    if (*synth) return cmd_synth(classes, count_per_class, out_dir, resolve_seed(seed));
    if (*train) return cmd_train(manifest, variant, epochs, lr, resolve_seed(seed), checkpoint_out, graph_flags);
    if (*eval) return cmd_eval(manifest, checkpoint, threads, graph_flags);
    if (*explain) return cmd_explain(graph_path, checkpoint, method, hops, threads, scores_out, graph_flags);
    if (*render) return cmd_render(graph_path, scores_in, svg_out, render_config, graph_flags);
  } catch (const Exit& e) {
    return e.code;
  }
  return kExitUsage;
}

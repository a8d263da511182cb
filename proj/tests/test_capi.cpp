#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "histograph/histograph.h"
#include "support/scratch.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Three nuclei: (0,0)-(60,0) at distance 60 link with weight 0.4; the third is isolated.
const char* kTriple = "id,x,y\n1,0,0\n2,60,0\n3,500,500\n";

struct Synth {
  std::string dir;
  std::string manifest;
};

Synth small_synth(const std::string& name, std::size_t per_class) {
  Synth s{histograph::testing::scratch_dir(name), ""};
  hg_synth_config cfg;
  hg_synth_config_default(&cfg);
  cfg.count_per_class = per_class;
  cfg.seed = 3;
  cfg.min_nuclei = 20;
  cfg.max_nuclei = 30;
  cfg.field_size = 400;
  cfg.ring_radius = 100;
  cfg.ring_jitter = 5;
  std::size_t files = 0;
  REQUIRE(hg_synth_write(&cfg, s.dir.c_str(), &files) == HG_OK);
  CHECK(files == 2 * per_class + 1);
  s.manifest = s.dir + "/manifest.csv";
  return s;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strcmp(hg_version(), "1.0.0") == 0);
  CHECK(std::strcmp(hg_status_name(HG_OK), "ok") == 0);
  CHECK(std::strcmp(hg_status_name(HG_ERR_IO), "I/O error") == 0);
  CHECK(std::strcmp(hg_status_name(static_cast<hg_status>(99)), "unknown status") == 0);
}

TEST_CASE("null arguments are rejected, frees accept null") {
  hg_graph* g = nullptr;
  CHECK(hg_graph_from_csv(nullptr, 100, nullptr, &g) == HG_ERR_INVALID_ARGUMENT);
  CHECK(hg_graph_load("x.json", nullptr) == HG_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(hg_last_error()) > 0);
  CHECK(hg_graph_node_count(nullptr) == 0);
  hg_graph_free(nullptr);
  hg_dataset_free(nullptr);
  hg_model_free(nullptr);
  hg_importance_free(nullptr);
  hg_string_free(nullptr);
}

TEST_CASE("graph building, stats, occlusion and JSON persistence") {
  const auto dir = histograph::testing::scratch_dir("capi-graph");
  write_text(dir + "/triple.csv", kTriple);
  hg_graph* g = nullptr;
  REQUIRE(hg_graph_from_csv((dir + "/triple.csv").c_str(), 100.0, nullptr, &g) == HG_OK);
  CHECK(hg_graph_node_count(g) == 3);
  CHECK(hg_graph_feature_count(g) == 2);
  hg_graph_stats s{};
  REQUIRE(hg_graph_get_stats(g, &s) == HG_OK);
  CHECK(s.nodes == 3);
  CHECK(s.edges == 1);
  CHECK(s.mean_edge_weight == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s.mean_degree == doctest::Approx(2.0 / 3.0));

  hg_graph* o = nullptr;
  REQUIRE(hg_graph_occlude(g, 0, 1, &o) == HG_OK);
  REQUIRE(hg_graph_get_stats(o, &s) == HG_OK);
  CHECK(s.edges == 0);
  CHECK(hg_graph_occlude(g, 3, 1, &o) == HG_ERR_BOUNDS);
  hg_graph_free(o);

  REQUIRE(hg_graph_save(g, (dir + "/g.json").c_str()) == HG_OK);
  hg_graph* back = nullptr;
  REQUIRE(hg_graph_load((dir + "/g.json").c_str(), &back) == HG_OK);
  REQUIRE(hg_graph_save(back, (dir + "/g2.json").c_str()) == HG_OK);
  CHECK(read_text(dir + "/g.json") == read_text(dir + "/g2.json"));
  hg_graph_free(back);

  hg_graph* wide = nullptr;
  REQUIRE(hg_graph_from_csv((dir + "/triple.csv").c_str(), 100.0, "one,x,y,degree", &wide) == HG_OK);
  CHECK(hg_graph_feature_count(wide) == 4);
  hg_graph_free(wide);
  hg_graph_free(g);
}

TEST_CASE("graph errors carry status codes and messages") {
  const auto dir = histograph::testing::scratch_dir("capi-graph-errors");
  hg_graph* g = nullptr;
  CHECK(hg_graph_from_csv((dir + "/missing.csv").c_str(), 100.0, nullptr, &g) == HG_ERR_IO);
  CHECK(g == nullptr);
  write_text(dir + "/empty.csv", "id,x,y\n");
  CHECK(hg_graph_from_csv((dir + "/empty.csv").c_str(), 100.0, nullptr, &g) == HG_ERR_EMPTY_INPUT);
  CHECK(std::string(hg_last_error()).find("no nuclei") != std::string::npos);
  write_text(dir + "/bad.csv", "id,x,y\n1,0,0\n2,abc,0\n");
  CHECK(hg_graph_from_csv((dir + "/bad.csv").c_str(), 100.0, nullptr, &g) == HG_ERR_VALIDATION);
  write_text(dir + "/ok.csv", kTriple);
  CHECK(hg_graph_from_csv((dir + "/ok.csv").c_str(), -1.0, nullptr, &g) == HG_ERR_VALIDATION);
  CHECK(hg_graph_from_csv((dir + "/ok.csv").c_str(), 100.0, "one,area", &g) == HG_ERR_VALIDATION);
  write_text(dir + "/corrupt.json", "{\"n\": 2,");
  CHECK(hg_graph_load((dir + "/corrupt.json").c_str(), &g) != HG_OK);
}

TEST_CASE("parsing variants and methods") {
  hg_variant v;
  REQUIRE(hg_variant_parse("rsf-attention", &v) == HG_OK);
  CHECK(v == HG_VARIANT_RSF_ATTENTION);
  CHECK(hg_variant_parse("resnet", &v) == HG_ERR_VALIDATION);
  hg_method m;
  REQUIRE(hg_method_parse("attention", &m) == HG_OK);
  CHECK(m == HG_METHOD_ATTENTION);
  CHECK(hg_method_parse("saliency", &m) == HG_ERR_VALIDATION);
}

TEST_CASE("model lifecycle through the C API") {
  const auto data = small_synth("capi-model", 3);
  hg_dataset* ds = nullptr;
  REQUIRE(hg_dataset_load(data.manifest.c_str(), 100.0, nullptr, &ds) == HG_OK);
  CHECK(hg_dataset_size(ds) == 6);
  CHECK(hg_dataset_feature_count(ds) == 2);
  CHECK(hg_dataset_class_count(ds) == 2);

  hg_model* model = nullptr;
  REQUIRE(hg_model_create(HG_VARIANT_RSF_ATTENTION, 2, 2, 7, &model) == HG_OK);
  CHECK(hg_model_variant(model) == HG_VARIANT_RSF_ATTENTION);
  const std::size_t count = hg_model_parameter_count(model);
  CHECK(count >= 270000);
  CHECK(count <= 330000);

  hg_train_config cfg;
  hg_train_config_default(&cfg);
  CHECK(cfg.epochs == 50);
  CHECK(cfg.learning_rate == 0.01);
  cfg.epochs = 2;
  std::vector<double> losses;
  REQUIRE(hg_model_train(model, ds, &cfg,
                         [](std::size_t, double loss, void* user) {
                           static_cast<std::vector<double>*>(user)->push_back(loss);
                         },
                         &losses) == HG_OK);
  CHECK(losses.size() == 2);

  double accuracy = -1.0;
  char* report = nullptr;
  REQUIRE(hg_model_evaluate(model, ds, 2, &accuracy, &report) == HG_OK);
  CHECK(accuracy >= 0.0);
  CHECK(accuracy <= 1.0);
  REQUIRE(report != nullptr);
  CHECK(std::string(report).find("\"accuracy\"") != std::string::npos);
  hg_string_free(report);

  const auto ckpt = data.dir + "/model.json";
  REQUIRE(hg_model_save(model, ckpt.c_str()) == HG_OK);
  hg_model* loaded = nullptr;
  REQUIRE(hg_model_load(ckpt.c_str(), &loaded) == HG_OK);
  REQUIRE(hg_model_save(loaded, (data.dir + "/model2.json").c_str()) == HG_OK);
  CHECK(read_text(ckpt) == read_text(data.dir + "/model2.json"));

  hg_graph* g = nullptr;
  REQUIRE(hg_graph_from_csv((data.dir + "/ring_0000.csv").c_str(), 100.0, nullptr, &g) == HG_OK);
  double p1[2], p2[2];
  std::size_t classes = 0;
  REQUIRE(hg_model_predict(model, g, p1, 2, &classes) == HG_OK);
  CHECK(classes == 2);
  REQUIRE(hg_model_predict(loaded, g, p2, 2, &classes) == HG_OK);
  CHECK(p1[0] == p2[0]);
  CHECK(p1[0] + p1[1] == doctest::Approx(1.0));
  classes = 0;
  CHECK(hg_model_predict(model, g, p1, 1, &classes) == HG_ERR_BOUNDS);
  CHECK(classes == 2);
  CHECK(hg_model_predict(model, g, nullptr, 0, &classes) == HG_OK);

  for (hg_method method : {HG_METHOD_OCCLUSION, HG_METHOD_ATTENTION}) {
    hg_importance* map = nullptr;
    REQUIRE(hg_explain(loaded, g, method, 1, 1, &map) == HG_OK);
    const std::size_t n = hg_importance_size(map);
    CHECK(n == hg_graph_node_count(g));
    std::vector<double> raw(n), norm(n);
    REQUIRE(hg_importance_scores(map, raw.data(), norm.data(), n) == HG_OK);
    for (double v : norm) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(hg_importance_scores(map, raw.data(), norm.data(), n - 1) == HG_ERR_BOUNDS);
    const auto csv = data.dir + "/scores.csv";
    REQUIRE(hg_importance_export(map, g, csv.c_str()) == HG_OK);
    hg_render_config rc;
    hg_render_config_default(&rc);
    REQUIRE(hg_render_svg(g, csv.c_str(), &rc, (data.dir + "/a.svg").c_str()) == HG_OK);
    REQUIRE(hg_render_svg(g, csv.c_str(), &rc, (data.dir + "/b.svg").c_str()) == HG_OK);
    CHECK(read_text(data.dir + "/a.svg") == read_text(data.dir + "/b.svg"));
    CHECK(read_text(data.dir + "/a.svg").find("<svg") != std::string::npos);
    hg_importance_free(map);
  }

  hg_graph_free(g);
  hg_model_free(loaded);
  hg_model_free(model);
  hg_dataset_free(ds);
}

TEST_CASE("model errors through the C API") {
  const auto dir = histograph::testing::scratch_dir("capi-model-errors");
  hg_model* model = nullptr;
  CHECK(hg_model_create(HG_VARIANT_RSF, 2, 1, 0, &model) == HG_ERR_VALIDATION);
  CHECK(hg_model_create(static_cast<hg_variant>(9), 2, 2, 0, &model) == HG_ERR_INVALID_ARGUMENT);
  CHECK(hg_model_load((dir + "/missing.json").c_str(), &model) == HG_ERR_IO);
  write_text(dir + "/corrupt.json", "not json");
  CHECK(hg_model_load((dir + "/corrupt.json").c_str(), &model) == HG_ERR_CORRUPT);
  write_text(dir + "/future.json", "{\"version\": 42}");
  CHECK(hg_model_load((dir + "/future.json").c_str(), &model) == HG_ERR_VERSION);

  REQUIRE(hg_model_create(HG_VARIANT_RSF, 2, 2, 0, &model) == HG_OK);
  write_text(dir + "/g.csv", kTriple);
  hg_graph* g = nullptr;
  REQUIRE(hg_graph_from_csv((dir + "/g.csv").c_str(), 100.0, "one,x,y", &g) == HG_OK);
  double p[2];
  std::size_t classes = 0;
  CHECK(hg_model_predict(model, g, p, 2, &classes) == HG_ERR_SHAPE);
  hg_importance* map = nullptr;
  CHECK(hg_explain(model, g, HG_METHOD_OCCLUSION, 1, 1, &map) == HG_ERR_SHAPE);
  hg_graph_free(g);

  REQUIRE(hg_graph_from_csv((dir + "/g.csv").c_str(), 100.0, nullptr, &g) == HG_OK);
  CHECK(hg_explain(model, g, HG_METHOD_ATTENTION, 1, 1, &map) == HG_ERR_UNSUPPORTED);
  CHECK(hg_explain(model, g, HG_METHOD_OCCLUSION, 0, 1, &map) == HG_ERR_VALIDATION);
  hg_graph_free(g);
  hg_model_free(model);
}

TEST_CASE("training failures through the C API") {
  const auto data = small_synth("capi-train-errors", 1);
  hg_dataset* ds = nullptr;
  REQUIRE(hg_dataset_load(data.manifest.c_str(), 100.0, nullptr, &ds) == HG_OK);
  hg_model* model = nullptr;
  REQUIRE(hg_model_create(HG_VARIANT_RSF, 2, 2, 1, &model) == HG_OK);
  hg_train_config cfg;
  hg_train_config_default(&cfg);
  cfg.epochs = 0;
  CHECK(hg_model_train(model, ds, &cfg, nullptr, nullptr) == HG_ERR_VALIDATION);
  cfg.epochs = 3;
  cfg.learning_rate = 1e300;
  CHECK(hg_model_train(model, ds, &cfg, nullptr, nullptr) == HG_ERR_NUMERIC);
  CHECK(std::string(hg_last_error()).find("epoch") != std::string::npos);
  hg_model_free(model);
  hg_dataset_free(ds);

  CHECK(hg_dataset_load((data.dir + "/none.csv").c_str(), 100.0, nullptr, &ds) == HG_ERR_IO);
}

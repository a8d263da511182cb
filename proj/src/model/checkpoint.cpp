#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "model/model.hpp"

namespace histograph::model {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json spec_to_json(const ModelSpec& s) {
  ordered_json j;
  j["variant"] = variant_name(s.variant);
  j["input_features"] = s.input_features;
  j["input_edge_channels"] = s.input_edge_channels;
  j["conv1"] = s.conv1;
  j["conv2"] = s.conv2;
  j["conv3"] = s.conv3;
  j["pool1"] = s.pool1;
  j["pool2"] = s.pool2;
  j["edge_conv"] = s.edge_conv;
  j["edge_conv_out"] = s.edge_conv_out;
  j["fc1"] = s.fc1;
  j["fc2"] = s.fc2;
  j["n_classes"] = s.n_classes;
  j["node_norm"] = s.node_norm;
  j["seed"] = s.seed;
  return j;
}

ModelSpec spec_from_json(const ordered_json& j) {
  ModelSpec s;
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.input_features = j.at("input_features").get<std::size_t>();
  s.input_edge_channels = j.at("input_edge_channels").get<std::size_t>();
  s.conv1 = j.at("conv1").get<std::size_t>();
  s.conv2 = j.at("conv2").get<std::size_t>();
  s.conv3 = j.at("conv3").get<std::size_t>();
  s.pool1 = j.at("pool1").get<std::size_t>();
  s.pool2 = j.at("pool2").get<std::size_t>();
  s.edge_conv = j.at("edge_conv").get<std::size_t>();
  s.edge_conv_out = j.at("edge_conv_out").get<std::size_t>();
  s.fc1 = j.at("fc1").get<std::size_t>();
  s.fc2 = j.at("fc2").get<std::size_t>();
  s.n_classes = j.at("n_classes").get<std::size_t>();
  s.node_norm = j.at("node_norm").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

// Compares every tensor against the shapes a fresh model of `spec` declares.
void check_parameter_shapes(const Checkpoint& c) {
  const Model reference(c.spec);
  const auto& expected = reference.parameters();
  if (expected.size() != c.params.size()) {
    fail(ErrorKind::Shape, "checkpoint holds " + std::to_string(c.params.size()) + " tensors but the spec declares " +
                               std::to_string(expected.size()));
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const auto& [name, tensor] = c.params[k];
    if (name != expected[k].name) {
      fail(ErrorKind::Shape, "checkpoint tensor '" + name + "' found where '" + expected[k].name + "' was expected");
    }
    if (tensor.shape() != expected[k].value.shape()) {
      fail(ErrorKind::Shape, "checkpoint tensor '" + name + "' has shape " + numerics::shape_string(tensor.shape()) +
                                 ", spec declares " + numerics::shape_string(expected[k].value.shape()));
    }
  }
}

}  // namespace

Checkpoint make_checkpoint(const Model& model, TrainMeta meta) {
  Checkpoint c;
  c.spec = model.spec();
  for (const auto& p : model.parameters()) c.params.emplace_back(p.name, p.value.value());
  c.meta = std::move(meta);
  return c;
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.version != Checkpoint::kVersion) {
    fail(ErrorKind::Version, "checkpoint version " + std::to_string(checkpoint.version) +
                                 " is not supported (this build reads version " +
                                 std::to_string(Checkpoint::kVersion) + ")");
  }
  check_parameter_shapes(checkpoint);
  Model model(checkpoint.spec);
  for (std::size_t k = 0; k < checkpoint.params.size(); ++k) {
    Var v = model.parameters()[k].value;
    v.mutable_value() = checkpoint.params[k].second;
  }
  return model;
}

std::string checkpoint_to_json(const Checkpoint& c) {
  ordered_json doc;
  doc["version"] = c.version;
  doc["spec"] = spec_to_json(c.spec);
  ordered_json params = ordered_json::object();
  for (const auto& [name, tensor] : c.params) {
    ordered_json entry;
    entry["shape"] = tensor.shape();
    entry["data"] = tensor.storage();
    params[name] = std::move(entry);
  }
  doc["params"] = std::move(params);
  ordered_json meta;
  meta["epochs_completed"] = c.meta.epochs_completed;
  meta["final_train_loss"] = c.meta.final_train_loss;
  meta["seed"] = c.meta.seed;
  meta["shuffle_seed"] = c.meta.shuffle_seed;
  meta["learning_rate"] = c.meta.learning_rate;
  meta["feature_names"] = c.meta.feature_names;
  doc["meta"] = std::move(meta);
  return doc.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    fail(ErrorKind::Corrupt, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    if (!doc.is_object() || !doc.contains("version")) fail(ErrorKind::Corrupt, "checkpoint has no version tag");
    c.version = doc.at("version").get<int>();
    if (c.version != Checkpoint::kVersion) {
      fail(ErrorKind::Version, "checkpoint version " + std::to_string(c.version) +
                                   " is not supported (this build reads version " +
                                   std::to_string(Checkpoint::kVersion) + ")");
    }
    c.spec = spec_from_json(doc.at("spec"));
    for (const auto& [name, entry] : doc.at("params").items()) {
      auto shape = entry.at("shape").get<numerics::Shape>();
      auto data = entry.at("data").get<std::vector<double>>();
      if (numerics::shape_size(shape) != data.size()) {
        fail(ErrorKind::Shape, "checkpoint tensor '" + name + "' data does not match its shape");
      }
      c.params.emplace_back(name, Tensor(std::move(shape), std::move(data)));
    }
    const auto& meta = doc.at("meta");
    c.meta.epochs_completed = meta.at("epochs_completed").get<std::size_t>();
    c.meta.final_train_loss = meta.at("final_train_loss").get<double>();
    c.meta.seed = meta.at("seed").get<std::uint64_t>();
    c.meta.shuffle_seed = meta.at("shuffle_seed").get<std::uint64_t>();
    c.meta.learning_rate = meta.at("learning_rate").get<double>();
    c.meta.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
  } catch (const ordered_json::exception& e) {
    fail(ErrorKind::Corrupt, std::string("checkpoint is malformed: ") + e.what());
  }
  check_parameter_shapes(c);
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const std::string text = checkpoint_to_json(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace histograph::model

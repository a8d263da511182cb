#include "model/model.hpp"

#include <algorithm>
#include <numeric>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "numerics/adam.hpp"
#include "numerics/rng.hpp"

namespace histograph::model {

namespace ops = numerics::ops;
using numerics::SplitMix64;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Rsf: return "rsf";
    case Variant::RsfEdge: return "rsf-edge";
    case Variant::RsfAttention: return "rsf-attention";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "rsf") return Variant::Rsf;
  if (name == "rsf-edge") return Variant::RsfEdge;
  if (name == "rsf-attention") return Variant::RsfAttention;
  fail(ErrorKind::Validation, "unknown variant '" + std::string(name) + "' (expected rsf, rsf-edge, rsf-attention)");
}

void ModelSpec::validate() const {
  const std::size_t widths[] = {input_features, input_edge_channels, conv1, conv2, conv3, pool1,
                                pool2,          edge_conv,           edge_conv_out, fc1, fc2};
  for (std::size_t w : widths) {
    if (w == 0) fail(ErrorKind::Validation, "model widths must be positive");
  }
  if (n_classes < 2) fail(ErrorKind::Validation, "model needs at least two classes");
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  SplitMix64 rng(spec_.seed);
  const bool edge = spec_.variant == Variant::RsfEdge;
  const std::size_t l0 = spec_.input_edge_channels;

  conv1_ = layers::VertexConvLayer::create(spec_.input_features, spec_.conv1, l0, rng);
  conv2_ = layers::VertexConvLayer::create(spec_.conv1, spec_.conv2, l0, rng);
  if (spec_.variant == Variant::RsfAttention) attention_ = layers::AttentionGate::create(spec_.conv2, rng);
  pool1_ = layers::PoolLayer::create(spec_.conv2, l0, spec_.pool1, rng);
  const std::size_t l1 = edge ? spec_.edge_conv : l0;
  if (edge) edge1_ = layers::EdgeConvLayer::create(l0, spec_.conv2, spec_.edge_conv, rng);
  conv3_ = layers::VertexConvLayer::create(spec_.conv2, spec_.conv3, l1, rng);
  if (edge) edge2_ = layers::EdgeConvLayer::create(l1, spec_.conv3, spec_.edge_conv, rng);
  pool2_ = layers::PoolLayer::create(spec_.conv3, l1, spec_.pool2, rng);
  if (edge) edge3_ = layers::EdgeConvLayer::create(l1, spec_.conv3, spec_.edge_conv_out, rng);
  fc1_ = layers::DenseLayer::create(readout_size(), spec_.fc1, true, rng);
  fc2_ = layers::DenseLayer::create(spec_.fc1, spec_.fc2, true, rng);
  fc3_ = layers::DenseLayer::create(spec_.fc2, spec_.n_classes, false, rng);
  if (spec_.node_norm) {
    norm1_ = layers::NodeNorm::create(spec_.conv1);
    norm2_ = layers::NodeNorm::create(spec_.conv2);
    norm3_ = layers::NodeNorm::create(spec_.conv3);
  }

  register_conv("conv1", conv1_);
  register_norm("norm1", norm1_);
  register_conv("conv2", conv2_);
  register_norm("norm2", norm2_);
  if (attention_) {
    params_.push_back({"attention.weights", attention_->weights});
    params_.push_back({"attention.bias", attention_->bias});
  }
  register_conv("pool1.embedding", pool1_.embedding);
  if (edge1_) {
    params_.push_back({"edge1.weights", edge1_->weights});
    params_.push_back({"edge1.bias", edge1_->bias});
  }
  register_conv("conv3", conv3_);
  register_norm("norm3", norm3_);
  if (edge2_) {
    params_.push_back({"edge2.weights", edge2_->weights});
    params_.push_back({"edge2.bias", edge2_->bias});
  }
  register_conv("pool2.embedding", pool2_.embedding);
  if (edge3_) {
    params_.push_back({"edge3.weights", edge3_->weights});
    params_.push_back({"edge3.bias", edge3_->bias});
  }
  params_.push_back({"fc1.weights", fc1_.weights});
  params_.push_back({"fc1.bias", fc1_.bias});
  params_.push_back({"fc2.weights", fc2_.weights});
  params_.push_back({"fc2.bias", fc2_.bias});
  params_.push_back({"fc3.weights", fc3_.weights});
  params_.push_back({"fc3.bias", fc3_.bias});
}

void Model::register_conv(const std::string& name, const layers::VertexConvLayer& layer) {
  params_.push_back({name + ".weights", layer.weights});
  params_.push_back({name + ".bias", layer.bias});
}

void Model::register_norm(const std::string& name, const std::optional<layers::NodeNorm>& layer) {
  if (!layer) return;
  params_.push_back({name + ".gain", layer->gain});
  params_.push_back({name + ".shift", layer->shift});
}

// conv -> [norm] -> leaky-relu
Var Model::conv_block(Tape* tape, const layers::VertexConvLayer& conv, const std::optional<layers::NodeNorm>& norm,
                      const Var& vertices, const Var& adjacency) const {
  Var h = layers::vertex_conv_forward(tape, conv, vertices, adjacency);
  if (norm) h = layers::node_norm_forward(tape, *norm, h);
  return ops::leaky_relu(tape, h, layers::kLeakySlope);
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.value().size();
  return total;
}

std::size_t Model::readout_size() const {
  const std::size_t m = spec_.pool2;
  const std::size_t channels = spec_.variant == Variant::RsfEdge ? spec_.edge_conv_out : spec_.input_edge_channels;
  return m * spec_.conv3 + m * (m + 1) / 2 * channels;
}

ForwardResult Model::forward(Tape* tape, const NucleusGraph& g) const {
  if (g.vertex_features.rank() != 2 || g.feature_count() != spec_.input_features) {
    fail(ErrorKind::Shape, "graph has " + std::to_string(g.feature_count()) + " vertex features but the model expects " +
                               std::to_string(spec_.input_features));
  }
  if (g.edge_channels() != spec_.input_edge_channels) {
    fail(ErrorKind::Shape, "graph has " + std::to_string(g.edge_channels()) +
                               " edge channels but the model expects " + std::to_string(spec_.input_edge_channels));
  }
  Var v0 = numerics::constant(g.vertex_features);
  Var a0 = numerics::constant(g.adjacency);

  ForwardResult result;
  Var h = conv_block(tape, conv1_, norm1_, v0, a0);
  h = conv_block(tape, conv2_, norm2_, h, a0);
  if (attention_) {
    auto att = layers::attention_forward(tape, *attention_, h);
    h = att.vertices;
    result.attention = att.scores;
  }

  auto p1 = layers::pool_forward(tape, pool1_, h, a0);
  Var a1 = p1.adjacency;
  if (edge1_) a1 = layers::edge_conv_forward(tape, *edge1_, p1.vertices, a1);
  h = conv_block(tape, conv3_, norm3_, p1.vertices, a1);
  if (edge2_) a1 = layers::edge_conv_forward(tape, *edge2_, h, a1);

  auto p2 = layers::pool_forward(tape, pool2_, h, a1);
  Var a2 = p2.adjacency;
  if (edge3_) a2 = layers::edge_conv_forward(tape, *edge3_, p2.vertices, a2);

  // Readout: pooled vertex features, then the upper triangle (with diagonal)
  // of every pooled edge channel.
  const std::size_t m = spec_.pool2;
  const std::size_t channels = a2.shape()[2];
  std::vector<std::size_t> triangle;
  triangle.reserve(m * (m + 1) / 2 * channels);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j)
      for (std::size_t l = 0; l < channels; ++l) triangle.push_back((i * m + j) * channels + l);
  Var readout = ops::concat(tape, {p2.vertices, ops::gather(tape, a2, std::move(triangle))});

  Var x = layers::dense_forward(tape, fc1_, readout);
  x = layers::dense_forward(tape, fc2_, x);
  result.logits = layers::dense_forward(tape, fc3_, x);
  return result;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction Model::predict(const NucleusGraph& g) const {
  const auto fr = forward(nullptr, g);
  Prediction p;
  p.probabilities = numerics::softmax_vector(fr.logits.value().data());
  p.predicted_class = argmax_lowest(p.probabilities);
  if (fr.attention) p.attention = fr.attention.value().storage();
  return p;
}

namespace {

void validate_labeled(const Model& model, std::span<const NucleusGraph> dataset, bool need_two_classes) {
  if (dataset.empty()) fail(ErrorKind::EmptyInput, "dataset is empty");
  std::vector<bool> present(model.spec().n_classes, false);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& label = dataset[i].label;
    if (!label) fail(ErrorKind::Validation, "graph " + std::to_string(i) + " has no label");
    if (*label < 0 || static_cast<std::size_t>(*label) >= model.spec().n_classes) {
      fail(ErrorKind::Validation, "graph " + std::to_string(i) + " has label " + std::to_string(*label) +
                                      " outside [0, " + std::to_string(model.spec().n_classes) + ")");
    }
    present[static_cast<std::size_t>(*label)] = true;
  }
  if (need_two_classes && std::count(present.begin(), present.end(), true) < 2) {
    fail(ErrorKind::Validation, "training needs at least two classes present");
  }
}

}  // namespace

TrainResult train(Model& model, std::span<const NucleusGraph> dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (cfg.epochs < 1) fail(ErrorKind::Validation, "epochs must be at least 1");
  if (!(cfg.learning_rate >= 0.0)) fail(ErrorKind::Validation, "learning rate must be non-negative");
  validate_labeled(model, dataset, true);

  const auto& params = model.parameters();
  std::vector<Var> vars;
  std::vector<Tensor*> values;
  for (const auto& p : params) {
    vars.push_back(p.value);
    values.push_back(&vars.back().mutable_value());
  }
  numerics::AdamState adam;
  adam.learning_rate = cfg.learning_rate;

  SplitMix64 rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> losses(dataset.size(), 0.0);

  TrainResult result;
  std::vector<const Tensor*> grads(vars.size(), nullptr);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    try {
      for (std::size_t idx : order) {
        const auto& g = dataset[idx];
        for (auto& v : vars) {
          if (v.has_grad()) v.grad_buffer().fill(0.0);
        }
        Tape tape;
        auto fr = model.forward(&tape, g);
        Var loss = ops::cross_entropy(&tape, fr.logits, static_cast<std::size_t>(*g.label));
        losses[idx] = loss.value().item();
        tape.backward(loss);
        for (std::size_t k = 0; k < vars.size(); ++k) grads[k] = vars[k].has_grad() ? &vars[k].grad() : nullptr;
        numerics::adam_step(values, grads, adam);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Numeric) {
        fail(ErrorKind::Numeric, "numeric failure in epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      throw;
    }
    const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    result.loss_curve.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  for (auto& v : vars) v.zero_grad();

  TrainMeta meta;
  meta.epochs_completed = cfg.epochs;
  meta.final_train_loss = result.loss_curve.back();
  meta.seed = model.spec().seed;
  meta.shuffle_seed = cfg.shuffle_seed;
  meta.learning_rate = cfg.learning_rate;
  meta.feature_names = dataset.front().feature_names;
  result.checkpoint = make_checkpoint(model, std::move(meta));
  return result;
}

EvalReport evaluate(const Model& model, std::span<const NucleusGraph> dataset, unsigned threads) {
  validate_labeled(model, dataset, false);
  const std::size_t classes = model.spec().n_classes;
  EvalReport report;
  report.predictions.resize(dataset.size());
  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    auto p = model.predict(dataset[i]);
    report.predictions[i] = GraphPrediction{p.predicted_class, *dataset[i].label, std::move(p.probabilities)};
  });
  report.class_counts.assign(classes, 0);
  report.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (const auto& p : report.predictions) {
    const auto truth = static_cast<std::size_t>(p.label);
    ++report.class_counts[truth];
    ++report.confusion[truth][p.predicted];
    if (truth == p.predicted) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return report;
}

}  // namespace histograph::model

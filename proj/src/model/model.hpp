#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graph/graph.hpp"
#include "layers/layers.hpp"

namespace histograph::model {

using graph::NucleusGraph;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

enum class Variant { Rsf, RsfEdge, RsfAttention };

std::string variant_name(Variant v);
Variant parse_variant(std::string_view name);

// Layer widths.  The defaults put every variant near 300k parameters.
struct ModelSpec {
  Variant variant = Variant::Rsf;
  std::size_t input_features = 2;
  std::size_t input_edge_channels = 1;
  std::size_t conv1 = 16;
  std::size_t conv2 = 32;
  std::size_t conv3 = 64;
  std::size_t pool1 = 32;
  std::size_t pool2 = 8;
  std::size_t edge_conv = 4;      // Edge Conv 1 and 2 output channels
  std::size_t edge_conv_out = 2;  // Edge Conv 3 output channels
  std::size_t fc1 = 400;
  std::size_t fc2 = 128;
  std::size_t n_classes = 2;
  // Standardize vertex features over the nodes after each vertex convolution.
  // Raw sum aggregation over dense graphs otherwise grows activations by
  // orders of magnitude per layer and saturates every softmax downstream.
  bool node_norm = true;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct NamedParameter {
  std::string name;
  Var value;
};

struct ForwardResult {
  Var logits;
  Var attention;  // empty unless the variant has an attention gate
};

struct Prediction {
  std::vector<double> probabilities;
  std::size_t predicted_class = 0;  // ties go to the lower index
  std::optional<std::vector<double>> attention;
};

class Model {
 public:
  explicit Model(ModelSpec spec);
  // Parameters are shared handles, so a copy would alias the original.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelSpec& spec() const noexcept { return spec_; }

  // Fixed order; names are stable checkpoint keys.
  const std::vector<NamedParameter>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;
  std::size_t readout_size() const;

  // Records onto `tape` when given; with a null tape the call is pure and
  // safe to run concurrently on a shared model.
  ForwardResult forward(Tape* tape, const NucleusGraph& g) const;
  Prediction predict(const NucleusGraph& g) const;

 private:
  void register_conv(const std::string& name, const layers::VertexConvLayer& layer);
  void register_norm(const std::string& name, const std::optional<layers::NodeNorm>& layer);
  Var conv_block(Tape* tape, const layers::VertexConvLayer& conv, const std::optional<layers::NodeNorm>& norm,
                 const Var& vertices, const Var& adjacency) const;

  ModelSpec spec_;
  layers::VertexConvLayer conv1_, conv2_, conv3_;
  layers::PoolLayer pool1_, pool2_;
  std::optional<layers::EdgeConvLayer> edge1_, edge2_, edge3_;
  std::optional<layers::AttentionGate> attention_;
  std::optional<layers::NodeNorm> norm1_, norm2_, norm3_;
  layers::DenseLayer fc1_, fc2_, fc3_;
  std::vector<NamedParameter> params_;
};

std::size_t argmax_lowest(std::span<const double> values);

// ---- training --------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 50;
  double learning_rate = 0.01;
  std::uint64_t shuffle_seed = 0;
};

struct TrainMeta {
  std::size_t epochs_completed = 0;
  double final_train_loss = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t shuffle_seed = 0;
  double learning_rate = 0.0;
  std::vector<std::string> feature_names;

  friend bool operator==(const TrainMeta&, const TrainMeta&) = default;
};

struct Checkpoint {
  static constexpr int kVersion = 1;

  int version = kVersion;
  ModelSpec spec;
  std::vector<std::pair<std::string, Tensor>> params;
  TrainMeta meta;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_curve;  // mean per-graph loss of each epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Per-graph Adam updates on softmax cross-entropy.  Graph order is shuffled
// every epoch from cfg.shuffle_seed.
TrainResult train(Model& model, std::span<const NucleusGraph> dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// ---- evaluation ------------------------------------------------------------

struct GraphPrediction {
  std::size_t predicted = 0;
  int label = 0;
  std::vector<double> probabilities;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::size_t> class_counts;            // true labels
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<GraphPrediction> predictions;
};

EvalReport evaluate(const Model& model, std::span<const NucleusGraph> dataset, unsigned threads = 0);
std::string eval_report_to_json(const EvalReport& report);

// ---- checkpoints ----------------------------------------------------------

Checkpoint make_checkpoint(const Model& model, TrainMeta meta = {});
Model model_from_checkpoint(const Checkpoint& checkpoint);

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace histograph::model

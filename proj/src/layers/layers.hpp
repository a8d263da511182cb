#pragma once

#include <cstddef>

#include "numerics/autodiff.hpp"
#include "numerics/rng.hpp"

namespace histograph::layers {

using numerics::SplitMix64;
using numerics::Tape;
using numerics::Var;

inline constexpr double kLeakySlope = 0.01;

// Spatial graph convolution.  weights[o, f, 0] scales the node's own feature
// (the identity term); weights[o, f, j] for j >= 1 scales the feature
// aggregated over edge channel j - 1.
struct VertexConvLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t edge_channels = 0;
  Var weights;  // out x in x (L + 1)
  Var bias;     // out

  static VertexConvLayer create(std::size_t in, std::size_t out, std::size_t edge_channels, SplitMix64& rng);
};

// V: N x F, A: N x N x L  ->  N x F'
Var vertex_conv_forward(Tape* tape, const VertexConvLayer& layer, const Var& vertices, const Var& adjacency);

// Soft cluster assignment of N nodes onto a fixed number of target nodes.
struct PoolLayer {
  std::size_t target_nodes = 0;
  VertexConvLayer embedding;  // produces one logit per target node

  static PoolLayer create(std::size_t in_features, std::size_t edge_channels, std::size_t target_nodes,
                          SplitMix64& rng);
};

struct Pooled {
  Var vertices;   // N' x F
  Var adjacency;  // N' x N' x L
  Var assignment; // N x N', rows sum to one
};

Pooled pool_forward(Tape* tape, const PoolLayer& layer, const Var& vertices, const Var& adjacency);

// Learned update of edge features from [edge, source vertex, target vertex]
// concatenations.  Output is symmetric with a zero diagonal, and pairs with no
// input edge stay exactly zero.
struct EdgeConvLayer {
  std::size_t in_edge_channels = 0;
  std::size_t vertex_features = 0;
  std::size_t out_edge_channels = 0;
  Var weights;  // L' x (L + 2F)
  Var bias;     // L'
  double slope = kLeakySlope;

  static EdgeConvLayer create(std::size_t in_edge_channels, std::size_t vertex_features,
                              std::size_t out_edge_channels, SplitMix64& rng);
};

Var edge_conv_forward(Tape* tape, const EdgeConvLayer& layer, const Var& vertices, const Var& adjacency);

// Per-node scalar gate: alpha = softmax_i(w . v_i + b), output row i is
// N * alpha_i * v_i so that uniform attention reproduces the input.
struct AttentionGate {
  std::size_t features = 0;
  Var weights;  // F
  Var bias;     // 1

  static AttentionGate create(std::size_t features, SplitMix64& rng);
};

struct Attended {
  Var vertices;
  Var scores;  // N, sums to one
};

Attended attention_forward(Tape* tape, const AttentionGate& gate, const Var& vertices);

// Per-graph feature standardization over the node axis with learned gain and
// shift.  Statistics always come from the graph at hand, in training and at
// inference alike, so the layer stays a pure function of one graph.
struct NodeNorm {
  std::size_t features = 0;
  Var gain;   // F, starts at 1
  Var shift;  // F, starts at 0
  double eps = 1e-5;

  static NodeNorm create(std::size_t features);
};

Var node_norm_forward(Tape* tape, const NodeNorm& layer, const Var& vertices);

struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Var weights;  // out x in
  Var bias;     // out
  bool activation = true;
  double slope = kLeakySlope;

  static DenseLayer create(std::size_t in, std::size_t out, bool activation, SplitMix64& rng);
};

Var dense_forward(Tape* tape, const DenseLayer& layer, const Var& x);

}  // namespace histograph::layers

#include "layers/layers.hpp"

#include <cmath>

#include "core/error.hpp"

namespace histograph::layers {

namespace ops = numerics::ops;
using numerics::Shape;
using numerics::Tensor;
using numerics::shape_string;

namespace {

Var uniform_parameter(Shape shape, std::size_t fan_in, SplitMix64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return numerics::parameter(std::move(t));
}

Var zero_parameter(Shape shape) { return numerics::parameter(Tensor(std::move(shape), 0.0)); }

void require_shape(const Var& v, const Shape& expected, const char* what) {
  if (v.shape() != expected) {
    fail(ErrorKind::Shape, std::string(what) + ": expected " + shape_string(expected) + ", got " +
                               shape_string(v.shape()));
  }
}

void require_graph_inputs(const Var& vertices, const Var& adjacency, std::size_t features, std::size_t channels,
                          const char* what) {
  if (vertices.value().rank() != 2 || adjacency.value().rank() != 3) {
    fail(ErrorKind::Shape, std::string(what) + ": expected V (N x F) and A (N x N x L)");
  }
  const std::size_t n = vertices.shape()[0];
  require_shape(vertices, {n, features}, what);
  require_shape(adjacency, {n, n, channels}, what);
}

}  // namespace

VertexConvLayer VertexConvLayer::create(std::size_t in, std::size_t out, std::size_t edge_channels,
                                        SplitMix64& rng) {
  VertexConvLayer layer;
  layer.in_features = in;
  layer.out_features = out;
  layer.edge_channels = edge_channels;
  layer.weights = uniform_parameter({out, in, edge_channels + 1}, in * (edge_channels + 1), rng);
  layer.bias = zero_parameter({out});
  return layer;
}

Var vertex_conv_forward(Tape* tape, const VertexConvLayer& layer, const Var& vertices, const Var& adjacency) {
  require_graph_inputs(vertices, adjacency, layer.in_features, layer.edge_channels, "vertex_conv");
  const std::size_t n = vertices.shape()[0];
  auto mixing = [&](std::size_t j) { return ops::transpose(tape, ops::slice_last(tape, layer.weights, j)); };

  Var out = ops::matmul(tape, vertices, mixing(0));
  for (std::size_t j = 1; j <= layer.edge_channels; ++j) {
    Var a_j = layer.edge_channels == 1 ? ops::reshape(tape, adjacency, {n, n})
                                       : ops::slice_last(tape, adjacency, j - 1);
    Var aggregated = ops::matmul(tape, a_j, vertices);
    out = ops::add(tape, out, ops::matmul(tape, aggregated, mixing(j)));
  }
  return ops::add_row_bias(tape, out, layer.bias);
}

PoolLayer PoolLayer::create(std::size_t in_features, std::size_t edge_channels, std::size_t target_nodes,
                            SplitMix64& rng) {
  if (target_nodes == 0) fail(ErrorKind::Validation, "pool target size must be at least 1");
  PoolLayer layer;
  layer.target_nodes = target_nodes;
  layer.embedding = VertexConvLayer::create(in_features, target_nodes, edge_channels, rng);
  return layer;
}

Pooled pool_forward(Tape* tape, const PoolLayer& layer, const Var& vertices, const Var& adjacency) {
  Var logits = vertex_conv_forward(tape, layer.embedding, vertices, adjacency);
  Var assignment = ops::softmax(tape, logits, 1);
  Var assignment_t = ops::transpose(tape, assignment);
  Pooled out;
  out.assignment = assignment;
  out.vertices = ops::matmul(tape, assignment_t, vertices);

  const std::size_t n = vertices.shape()[0];
  const std::size_t channels = adjacency.shape()[2];
  std::vector<Var> slices;
  slices.reserve(channels);
  for (std::size_t l = 0; l < channels; ++l) {
    Var a_l = channels == 1 ? ops::reshape(tape, adjacency, {n, n}) : ops::slice_last(tape, adjacency, l);
    slices.push_back(ops::matmul(tape, assignment_t, ops::matmul(tape, a_l, assignment)));
  }
  if (channels == 1) {
    const std::size_t m = layer.target_nodes;
    out.adjacency = ops::reshape(tape, slices[0], {m, m, 1});
  } else {
    out.adjacency = ops::stack_last(tape, slices);
  }
  return out;
}

EdgeConvLayer EdgeConvLayer::create(std::size_t in_edge_channels, std::size_t vertex_features,
                                    std::size_t out_edge_channels, SplitMix64& rng) {
  EdgeConvLayer layer;
  layer.in_edge_channels = in_edge_channels;
  layer.vertex_features = vertex_features;
  layer.out_edge_channels = out_edge_channels;
  const std::size_t width = in_edge_channels + 2 * vertex_features;
  layer.weights = uniform_parameter({out_edge_channels, width}, width, rng);
  layer.bias = zero_parameter({out_edge_channels});
  return layer;
}

Var edge_conv_forward(Tape* tape, const EdgeConvLayer& layer, const Var& vertices, const Var& adjacency) {
  const std::size_t in_l = layer.in_edge_channels;
  const std::size_t f = layer.vertex_features;
  const std::size_t out_l = layer.out_edge_channels;
  require_graph_inputs(vertices, adjacency, f, in_l, "edge_conv");
  require_shape(layer.weights, {out_l, in_l + 2 * f}, "edge_conv weights");
  const std::size_t n = vertices.shape()[0];
  const std::size_t width = in_l + 2 * f;
  const double slope = layer.slope;

  const auto& a = adjacency.value();
  const auto& v = vertices.value();
  const auto& w = layer.weights.value();
  const auto& b = layer.bias.value();

  // Per-node projections of source and target features.
  Tensor source({n, out_l}, 0.0), target({n, out_l}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out_l; ++o) {
      double s = 0.0, t = 0.0;
      for (std::size_t c = 0; c < f; ++c) {
        s += w[o * width + in_l + c] * v.at(i, c);
        t += w[o * width + in_l + f + c] * v.at(i, c);
      }
      source.at(i, o) = s;
      target.at(i, o) = t;
    }
  }

  // pre-activations for every ordered pair carrying an input edge
  std::vector<char> active(n * n, 0);
  Tensor pre({n, n, out_l}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      bool any = false;
      for (std::size_t l = 0; l < in_l; ++l) any = any || a.at(i, j, l) != 0.0;
      if (!any) continue;
      active[i * n + j] = 1;
      for (std::size_t o = 0; o < out_l; ++o) {
        double z = b[o] + source.at(i, o) + target.at(j, o);
        for (std::size_t l = 0; l < in_l; ++l) z += w[o * width + l] * a.at(i, j, l);
        pre.at(i, j, o) = z;
      }
    }
  }
  numerics::note_signs(pre.data());
  auto act = [slope](double z) { return z > 0.0 ? z : slope * z; };
  Tensor result({n, n, out_l}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t o = 0; o < out_l; ++o) {
        const double forward = active[i * n + j] ? act(pre.at(i, j, o)) : 0.0;
        const double backward = active[j * n + i] ? act(pre.at(j, i, o)) : 0.0;
        const double sym = 0.5 * (forward + backward);
        result.at(i, j, o) = sym;
        result.at(j, i, o) = sym;
      }
    }
  }
  numerics::require_finite(result, "edge_conv");

  const bool rec = numerics::should_record(tape, {&vertices, &adjacency, &layer.weights, &layer.bias});
  Var out(std::move(result), rec);
  if (rec) {
    tape->record([vertices, adjacency, weights = layer.weights, bias = layer.bias, out, pre = std::move(pre),
                  active = std::move(active), n, f, in_l, out_l, width, slope]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      const auto& a = adjacency.value();
      const auto& v = vertices.value();
      const auto& w = weights.value();
      Tensor* gv = vertices.requires_grad() ? &vertices.grad_buffer() : nullptr;
      Tensor* ga = adjacency.requires_grad() ? &adjacency.grad_buffer() : nullptr;
      Tensor* gw = weights.requires_grad() ? &weights.grad_buffer() : nullptr;
      Tensor* gb = bias.requires_grad() ? &bias.grad_buffer() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (!active[i * n + j]) continue;
          for (std::size_t o = 0; o < out_l; ++o) {
            // act(pre_ij) feeds both out_ij and out_ji with weight 1/2.
            const double z = pre.at(i, j, o);
            const double d = 0.5 * (g.at(i, j, o) + g.at(j, i, o)) * (z > 0.0 ? 1.0 : slope);
            if (d == 0.0) continue;
            if (gb) (*gb)[o] += d;
            for (std::size_t l = 0; l < in_l; ++l) {
              if (gw) (*gw)[o * width + l] += d * a.at(i, j, l);
              if (ga) ga->at(i, j, l) += d * w[o * width + l];
            }
            for (std::size_t c = 0; c < f; ++c) {
              if (gw) {
                (*gw)[o * width + in_l + c] += d * v.at(i, c);
                (*gw)[o * width + in_l + f + c] += d * v.at(j, c);
              }
              if (gv) {
                gv->at(i, c) += d * w[o * width + in_l + c];
                gv->at(j, c) += d * w[o * width + in_l + f + c];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

AttentionGate AttentionGate::create(std::size_t features, SplitMix64& rng) {
  AttentionGate gate;
  gate.features = features;
  gate.weights = uniform_parameter({features}, features, rng);
  gate.bias = zero_parameter({1});
  return gate;
}

Attended attention_forward(Tape* tape, const AttentionGate& gate, const Var& vertices) {
  if (vertices.value().rank() != 2 || vertices.shape()[1] != gate.features) {
    fail(ErrorKind::Shape, "attention: expected N x " + std::to_string(gate.features) + " input, got " +
                               shape_string(vertices.shape()));
  }
  const std::size_t n = vertices.shape()[0];
  Var w = ops::reshape(tape, gate.weights, {gate.features, 1});
  Var logits = ops::add_row_bias(tape, ops::matmul(tape, vertices, w), gate.bias);
  Var flat = ops::reshape(tape, logits, {n});
  Attended out;
  out.scores = ops::softmax(tape, flat, 0);
  // N * alpha computed inside the softmax so that uniform attention is
  // bit-exactly the identity.
  out.vertices = ops::scale_rows(tape, vertices, ops::softmax(tape, flat, 0, static_cast<double>(n)));
  return out;
}

NodeNorm NodeNorm::create(std::size_t features) {
  NodeNorm layer;
  layer.features = features;
  layer.gain = numerics::parameter(Tensor({features}, 1.0));
  layer.shift = zero_parameter({features});
  return layer;
}

Var node_norm_forward(Tape* tape, const NodeNorm& layer, const Var& vertices) {
  if (vertices.value().rank() != 2 || vertices.shape()[1] != layer.features) {
    fail(ErrorKind::Shape, "node_norm: expected N x " + std::to_string(layer.features) + " input, got " +
                               shape_string(vertices.shape()));
  }
  return ops::node_norm(tape, vertices, layer.gain, layer.shift, layer.eps);
}

DenseLayer DenseLayer::create(std::size_t in, std::size_t out, bool activation, SplitMix64& rng) {
  DenseLayer layer;
  layer.in_features = in;
  layer.out_features = out;
  layer.weights = uniform_parameter({out, in}, in, rng);
  layer.bias = zero_parameter({out});
  layer.activation = activation;
  return layer;
}

Var dense_forward(Tape* tape, const DenseLayer& layer, const Var& x) {
  if (x.value().size() != layer.in_features) {
    fail(ErrorKind::Shape, "dense: expected " + std::to_string(layer.in_features) + " inputs, got " +
                               std::to_string(x.value().size()));
  }
  Var column = ops::reshape(tape, x, {layer.in_features, 1});
  Var y = ops::reshape(tape, ops::matmul(tape, layer.weights, column), {layer.out_features});
  y = ops::add(tape, y, layer.bias);
  return layer.activation ? ops::leaky_relu(tape, y, layer.slope) : y;
}

}  // namespace histograph::layers

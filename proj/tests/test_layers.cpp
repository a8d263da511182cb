#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "layers/layers.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/layer_checks.hpp"

using namespace histograph;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using numerics::constant;
namespace ops = numerics::ops;

namespace {

using testing::weighted_sum;

void set(Var& v, std::vector<double> values) { v.mutable_value() = Tensor(v.shape(), std::move(values)); }

double leaky(double x, double slope) { return x > 0 ? x : slope * x; }

// Direct transcription of the convolution sum, no matrix kernels.
Tensor naive_vertex_conv(const layers::VertexConvLayer& layer, const Tensor& v, const Tensor& a) {
  const std::size_t n = v.dim(0);
  const auto& h = layer.weights.value();
  Tensor out({n, layer.out_features}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < layer.out_features; ++o) {
      double s = layer.bias.value()[o];
      for (std::size_t f = 0; f < layer.in_features; ++f) {
        s += h.at(o, f, 0) * v.at(i, f);
        for (std::size_t j = 1; j <= layer.edge_channels; ++j)
          for (std::size_t k = 0; k < n; ++k) s += h.at(o, f, j) * a.at(i, k, j - 1) * v.at(k, f);
      }
      out.at(i, o) = s;
    }
  return out;
}

struct NaivePool {
  Tensor s, v, a;
};

NaivePool naive_pool(const layers::PoolLayer& layer, const Tensor& v, const Tensor& a) {
  const std::size_t n = v.dim(0), m = layer.target_nodes, f = v.dim(1), l = a.dim(2);
  const Tensor logits = naive_vertex_conv(layer.embedding, v, a);
  NaivePool r{Tensor({n, m}, 0.0), Tensor({m, f}, 0.0), Tensor({m, m, l}, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    double peak = logits.at(i, 0), total = 0.0;
    for (std::size_t c = 1; c < m; ++c) peak = std::max(peak, logits.at(i, c));
    for (std::size_t c = 0; c < m; ++c) total += std::exp(logits.at(i, c) - peak);
    for (std::size_t c = 0; c < m; ++c) r.s.at(i, c) = std::exp(logits.at(i, c) - peak) / total;
  }
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t k = 0; k < f; ++k)
      for (std::size_t i = 0; i < n; ++i) r.v.at(c, k) += r.s.at(i, c) * v.at(i, k);
  for (std::size_t ch = 0; ch < l; ++ch)
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = 0; q < m; ++q)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) r.a.at(p, q, ch) += r.s.at(i, p) * a.at(i, j, ch) * r.s.at(j, q);
  return r;
}

Tensor naive_edge_conv(const layers::EdgeConvLayer& layer, const Tensor& v, const Tensor& a) {
  const std::size_t n = v.dim(0), l = layer.in_edge_channels, f = layer.vertex_features;
  const std::size_t lo = layer.out_edge_channels;
  Tensor directed({n, n, lo}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      bool edge = false;
      for (std::size_t c = 0; c < l; ++c) edge = edge || a.at(i, j, c) != 0.0;
      if (!edge || i == j) continue;
      std::vector<double> x;
      for (std::size_t c = 0; c < l; ++c) x.push_back(a.at(i, j, c));
      for (std::size_t k = 0; k < f; ++k) x.push_back(v.at(i, k));
      for (std::size_t k = 0; k < f; ++k) x.push_back(v.at(j, k));
      for (std::size_t o = 0; o < lo; ++o) {
        double s = layer.bias.value()[o];
        for (std::size_t k = 0; k < x.size(); ++k) s += layer.weights.value().at(o, k) * x[k];
        directed.at(i, j, o) = leaky(s, layer.slope);
      }
    }
  Tensor out({n, n, lo}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t o = 0; o < lo; ++o)
        if (i != j) out.at(i, j, o) = 0.5 * (directed.at(i, j, o) + directed.at(j, i, o));
  return out;
}

void check_close(const Tensor& a, const Tensor& b, double tol) {
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= tol);
}

}  // namespace

// ---- vertex convolution ---------------------------------------------------

TEST_CASE("vertex conv: a lone node only sees the identity term") {
  numerics::SplitMix64 rng(1);
  auto layer = layers::VertexConvLayer::create(1, 1, 1, rng);
  set(layer.weights, {3.0, 7.0});
  set(layer.bias, {1.0});
  const auto y = layers::vertex_conv_forward(nullptr, layer, constant(Tensor::matrix({{2.0}})),
                                             constant(Tensor({1, 1, 1}, 0.0)));
  CHECK(y.value().at(0, 0) == 7.0);
}

TEST_CASE("vertex conv: two nodes joined by a 0.5 edge") {
  numerics::SplitMix64 rng(1);
  auto layer = layers::VertexConvLayer::create(1, 1, 1, rng);
  set(layer.weights, {1.0, 2.0});
  set(layer.bias, {0.0});
  const Tensor a({2, 2, 1}, std::vector<double>{0.0, 0.5, 0.5, 0.0});
  const auto y = layers::vertex_conv_forward(nullptr, layer, constant(Tensor::matrix({{1.0}, {3.0}})), constant(a));
  CHECK(y.value().at(0, 0) == 4.0);
  CHECK(y.value().at(1, 0) == 4.0);
}

TEST_CASE("vertex conv: zero filters leave only the bias") {
  numerics::SplitMix64 rng(2);
  auto layer = layers::VertexConvLayer::create(3, 4, 2, rng);
  layer.weights.mutable_value().fill(0.0);
  layer.bias.mutable_value().fill(-1.25);
  const auto y = layers::vertex_conv_forward(nullptr, layer, constant(testing::random_tensor({5, 3}, rng)),
                                             constant(testing::random_adjacency(5, 2, rng)));
  for (double v : y.value().data()) CHECK(v == -1.25);
}

TEST_CASE("vertex conv matches the naive sum and rejects bad shapes") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    numerics::SplitMix64 rng(seed);
    auto layer = layers::VertexConvLayer::create(3, 2, 2, rng);
    set(layer.bias, {0.3, -0.2});
    const Tensor v = testing::random_tensor({6, 3}, rng), a = testing::random_adjacency(6, 2, rng);
    check_close(layers::vertex_conv_forward(nullptr, layer, constant(v), constant(a)).value(),
                naive_vertex_conv(layer, v, a), 1e-12);
  }
  numerics::SplitMix64 rng(3);
  auto layer = layers::VertexConvLayer::create(3, 2, 1, rng);
  CHECK_THROWS_AS(layers::vertex_conv_forward(nullptr, layer, constant(Tensor({4, 2}, 1.0)),
                                              constant(Tensor({4, 4, 1}, 0.0))),
                  Error);
  CHECK_THROWS_AS(layers::vertex_conv_forward(nullptr, layer, constant(Tensor({4, 3}, 1.0)),
                                              constant(Tensor({4, 4, 2}, 0.0))),
                  Error);
}

TEST_CASE("vertex conv is permutation equivariant") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    numerics::SplitMix64 rng(seed);
    auto layer = layers::VertexConvLayer::create(2, 3, 2, rng);
    const std::size_t n = 7;
    const Tensor v = testing::random_tensor({n, 2}, rng), a = testing::random_adjacency(n, 2, rng);
    const auto perm = testing::random_permutation(n, rng);
    Tensor pv({n, 2}, 0.0), pa({n, n, 2}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < 2; ++f) pv.at(i, f) = v.at(perm[i], f);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < 2; ++l) pa.at(i, j, l) = a.at(perm[i], perm[j], l);
    }
    const auto y = layers::vertex_conv_forward(nullptr, layer, constant(v), constant(a)).value();
    const auto py = layers::vertex_conv_forward(nullptr, layer, constant(pv), constant(pa)).value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < 3; ++o) CHECK(std::fabs(py.at(i, o) - y.at(perm[i], o)) <= 1e-9);
  }
}

// ---- pooling --------------------------------------------------------------

TEST_CASE("pooling onto one cluster collapses to sums") {
  numerics::SplitMix64 rng(4);
  auto layer = layers::PoolLayer::create(2, 1, 1, rng);
  const Tensor v = testing::random_tensor({5, 2}, rng), a = testing::random_adjacency(5, 1, rng);
  const auto p = layers::pool_forward(nullptr, layer, constant(v), constant(a));
  for (double s : p.assignment.value().data()) CHECK(s == 1.0);
  for (std::size_t f = 0; f < 2; ++f) {
    double col = 0.0;
    for (std::size_t i = 0; i < 5; ++i) col += v.at(i, f);
    CHECK(p.vertices.value().at(0, f) == doctest::Approx(col).epsilon(1e-14));
  }
  double total = 0.0;
  for (double w : a.data()) total += w;
  CHECK(p.adjacency.value().at(0, 0, 0) == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("pooling with equal embedding logits splits every node evenly") {
  numerics::SplitMix64 rng(5);
  auto layer = layers::PoolLayer::create(1, 1, 2, rng);
  layer.embedding.weights.mutable_value().fill(0.0);
  const Tensor v = Tensor::matrix({{2.0}, {6.0}});
  const auto p = layers::pool_forward(nullptr, layer, constant(v), constant(Tensor({2, 2, 1}, 0.0)));
  for (double s : p.assignment.value().data()) CHECK(s == 0.5);
  CHECK(p.vertices.value().at(0, 0) == 4.0);
  CHECK(p.vertices.value().at(1, 0) == 4.0);
}

TEST_CASE("pooling matches a dense-algebra oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    numerics::SplitMix64 rng(seed);
    auto layer = layers::PoolLayer::create(3, 2, 2, rng);
    const Tensor v = testing::random_tensor({4, 3}, rng), a = testing::random_adjacency(4, 2, rng, 0.8);
    const auto p = layers::pool_forward(nullptr, layer, constant(v), constant(a));
    const auto o = naive_pool(layer, v, a);
    check_close(p.assignment.value(), o.s, 1e-12);
    check_close(p.vertices.value(), o.v, 1e-12);
    check_close(p.adjacency.value(), o.a, 1e-12);
  }
  numerics::SplitMix64 rng(1);
  CHECK_THROWS_AS(layers::PoolLayer::create(2, 1, 0, rng), Error);
}

TEST_CASE("pooling assignment rows are distributions") {
  numerics::SplitMix64 rng(6);
  auto layer = layers::PoolLayer::create(2, 1, 3, rng);
  const auto p = layers::pool_forward(nullptr, layer, constant(testing::random_tensor({6, 2}, rng)),
                                      constant(testing::random_adjacency(6, 1, rng)));
  for (std::size_t i = 0; i < 6; ++i) {
    double row = 0.0;
    for (std::size_t c = 0; c < 3; ++c) row += p.assignment.value().at(i, c);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-14));
  }
}

// ---- edge convolution -----------------------------------------------------

TEST_CASE("edge conv: zero weights give an all-zero output") {
  numerics::SplitMix64 rng(7);
  auto layer = layers::EdgeConvLayer::create(1, 2, 3, rng);
  layer.weights.mutable_value().fill(0.0);
  const auto y = layers::edge_conv_forward(nullptr, layer, constant(testing::random_tensor({5, 2}, rng)),
                                           constant(testing::random_adjacency(5, 1, rng)));
  for (double v : y.value().data()) CHECK(v == 0.0);
}

TEST_CASE("edge conv: one edge between identical nodes") {
  numerics::SplitMix64 rng(8);
  auto layer = layers::EdgeConvLayer::create(1, 1, 1, rng);
  set(layer.weights, {1.0, 1.0, 1.0});
  set(layer.bias, {0.0});
  const Tensor a({2, 2, 1}, std::vector<double>{0.0, 1.0, 1.0, 0.0});
  const auto y = layers::edge_conv_forward(nullptr, layer, constant(Tensor::matrix({{2.0}, {2.0}})), constant(a));
  CHECK(y.value().at(0, 1, 0) == 5.0);
  CHECK(y.value().at(1, 0, 0) == 5.0);
  CHECK(y.value().at(0, 0, 0) == 0.0);
}

TEST_CASE("edge conv matches the naive oracle, keeps sparsity and symmetry") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    numerics::SplitMix64 rng(seed);
    auto layer = layers::EdgeConvLayer::create(2, 3, 2, rng);
    set(layer.bias, {0.1, -0.3});
    const Tensor v = testing::random_tensor({6, 3}, rng), a = testing::random_adjacency(6, 2, rng, 0.4);
    const auto y = layers::edge_conv_forward(nullptr, layer, constant(v), constant(a)).value();
    check_close(y, naive_edge_conv(layer, v, a), 1e-12);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t o = 0; o < 2; ++o) {
          CHECK(y.at(i, j, o) == y.at(j, i, o));
          if (a.at(i, j, 0) == 0.0 && a.at(i, j, 1) == 0.0) CHECK(y.at(i, j, o) == 0.0);
        }
  }
}

TEST_CASE("edge conv: swapping the two endpoints leaves the edge value unchanged") {
  numerics::SplitMix64 rng(9);
  auto layer = layers::EdgeConvLayer::create(1, 2, 1, rng);
  const Tensor a({2, 2, 1}, std::vector<double>{0.0, 0.7, 0.7, 0.0});
  const Tensor v = Tensor::matrix({{1.0, -2.0}, {0.5, 3.0}});
  const Tensor swapped = Tensor::matrix({{0.5, 3.0}, {1.0, -2.0}});
  const auto y1 = layers::edge_conv_forward(nullptr, layer, constant(v), constant(a)).value();
  const auto y2 = layers::edge_conv_forward(nullptr, layer, constant(swapped), constant(a)).value();
  CHECK(y1.at(0, 1, 0) == y2.at(0, 1, 0));
}

// ---- attention ------------------------------------------------------------

TEST_CASE("attention with zero weights is exactly the identity") {
  for (std::size_t n : {1u, 3u, 7u, 49u, 250u}) {
    numerics::SplitMix64 rng(n);
    auto gate = layers::AttentionGate::create(3, rng);
    gate.weights.mutable_value().fill(0.0);
    const Tensor v = testing::random_tensor({n, 3}, rng);
    const auto out = layers::attention_forward(nullptr, gate, constant(v));
    CHECK(out.vertices.value() == v);
    for (double s : out.scores.value().data()) CHECK(s == doctest::Approx(1.0 / static_cast<double>(n)));
  }
}

TEST_CASE("attention: logits (ln 3, 0) give weights (0.75, 0.25)") {
  numerics::SplitMix64 rng(10);
  auto gate = layers::AttentionGate::create(1, rng);
  set(gate.weights, {1.0});
  const Tensor v = Tensor::matrix({{std::log(3.0)}, {0.0}});
  const auto out = layers::attention_forward(nullptr, gate, constant(v));
  CHECK(out.scores.value()[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(out.scores.value()[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(out.vertices.value().at(0, 0) == doctest::Approx(1.5 * std::log(3.0)).epsilon(1e-15));
  CHECK(out.vertices.value().at(1, 0) == 0.0);
}

TEST_CASE("attention scores are positive and sum to one") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    numerics::SplitMix64 rng(seed);
    auto gate = layers::AttentionGate::create(4, rng);
    const auto out = layers::attention_forward(nullptr, gate, constant(testing::random_tensor({9, 4}, rng, -3, 3)));
    double total = 0.0;
    for (double s : out.scores.value().data()) {
      CHECK(s > 0.0);
      total += s;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
}

// ---- dense ----------------------------------------------------------------

TEST_CASE("dense: identity, bias-only and a naive dot product") {
  numerics::SplitMix64 rng(11);
  auto layer = layers::DenseLayer::create(3, 3, false, rng);
  set(layer.weights, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor x = Tensor::vector({0.5, -2.0, 4.0});
  CHECK(layers::dense_forward(nullptr, layer, constant(x)).value() == x);

  layer.weights.mutable_value().fill(0.0);
  layer.bias.mutable_value().fill(2.5);
  const auto biased = layers::dense_forward(nullptr, layer, constant(x));
  for (double v : biased.value().data()) CHECK(v == 2.5);

  auto hidden = layers::DenseLayer::create(4, 3, true, rng);
  set(hidden.bias, {0.1, 0.0, -0.1});
  const Tensor in = testing::random_tensor({4}, rng);
  const auto y = layers::dense_forward(nullptr, hidden, constant(in)).value();
  for (std::size_t o = 0; o < 3; ++o) {
    double s = hidden.bias.value()[o];
    for (std::size_t k = 0; k < 4; ++k) s += hidden.weights.value().at(o, k) * in[k];
    CHECK(std::fabs(y[o] - leaky(s, layers::kLeakySlope)) <= 1e-12);
  }
  CHECK_THROWS_AS(layers::dense_forward(nullptr, hidden, constant(Tensor({5}, 0.0))), Error);
}

TEST_CASE("initialization is seeded, bounded by sqrt(1/fan_in), biases zero") {
  numerics::SplitMix64 a(99), b(99);
  const auto la = layers::VertexConvLayer::create(4, 5, 2, a);
  const auto lb = layers::VertexConvLayer::create(4, 5, 2, b);
  CHECK(la.weights.value() == lb.weights.value());
  const double bound = std::sqrt(1.0 / 12.0);
  for (double w : la.weights.value().data()) CHECK(std::fabs(w) <= bound);
  for (double w : la.bias.value().data()) CHECK(w == 0.0);
}

// ---- gradients ------------------------------------------------------------

TEST_CASE("layer gradients match central finite differences over 20 seeds") {
  const auto s = testing::layer_sweep(20);
  CHECK(s.conv < 1e-6);
  CHECK(s.pool < 1e-6);
  CHECK(s.edge < 1e-6);
  CHECK(s.attention < 1e-6);
  CHECK(s.norm < 1e-6);
  CHECK(s.dense < 1e-6);
  CHECK(s.gate_bias_grad < 1e-12);
  CHECK(s.kinks * 100 < s.checked);
}

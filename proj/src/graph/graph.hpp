#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "numerics/tensor.hpp"

namespace histograph::graph {

using numerics::Tensor;

struct NucleusRecord {
  std::int64_t id = 0;
  double x = 0.0;  // pixels
  double y = 0.0;
};

enum class FeatureChannel { ConstantOne, NormalizedX, NormalizedY, Degree };

std::string feature_name(FeatureChannel channel);
// Comma-separated list of "one", "x", "y", "degree"; "default" means one,degree.
std::vector<FeatureChannel> parse_feature_recipe(std::string_view recipe);

struct GraphBuildConfig {
  double distance_threshold = 100.0;
  std::vector<FeatureChannel> features{FeatureChannel::ConstantOne, FeatureChannel::Degree};
};

struct NucleusGraph {
  std::size_t n = 0;
  Tensor vertex_features;  // N x F
  Tensor adjacency;        // N x N x L
  Tensor centroids;        // N x 2, pixels
  std::optional<int> label;
  std::vector<std::string> feature_names;
  std::vector<std::int64_t> ids;  // source nucleus ids, row order

  std::size_t feature_count() const { return vertex_features.dim(1); }
  std::size_t edge_channels() const { return adjacency.dim(2); }
  bool has_edge(std::size_t i, std::size_t j) const;

  friend bool operator==(const NucleusGraph&, const NucleusGraph&) = default;
};

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;  // unordered pairs with any nonzero channel
  double mean_degree = 0.0;
  double mean_edge_weight = 0.0;  // channel 0 over existing edges
};

double euclidean_distance(const NucleusRecord& a, const NucleusRecord& b);

// Links every unordered pair closer than the threshold with weight
// 1 - dist / threshold in a single edge channel.
NucleusGraph build_graph(std::span<const NucleusRecord> nuclei, const GraphBuildConfig& config);

// Throws Validation when shapes disagree, A is asymmetric or has a nonzero
// diagonal, or any value is non-finite.
void validate(const NucleusGraph& g);

// BFS ball over nonzero adjacency entries, sorted ascending, center included.
std::vector<std::size_t> neighbors_within(const NucleusGraph& g, std::size_t center, std::size_t hops);

// Zeroes the vertex features and every incident edge of the `hops` ball
// around `center`.  Node count, centroids and label are untouched.
NucleusGraph occlude(const NucleusGraph& g, std::size_t center, std::size_t hops);

GraphStats graph_stats(const NucleusGraph& g);

// Row k of the result is row perm[k] of the input.
NucleusGraph permute(const NucleusGraph& g, std::span<const std::size_t> perm);

// ---- interchange ---------------------------------------------------------

std::vector<NucleusRecord> parse_centroids_csv(std::istream& in);
std::vector<NucleusRecord> read_centroids_csv(const std::string& path);
void write_centroids_csv(const std::string& path, std::span<const NucleusRecord> nuclei);

std::string graph_to_json(const NucleusGraph& g);
NucleusGraph graph_from_json(std::string_view text);
void save_graph(const NucleusGraph& g, const std::string& path);
NucleusGraph load_graph(const std::string& path);

}  // namespace histograph::graph

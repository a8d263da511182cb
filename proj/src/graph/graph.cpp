#include "graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_set>

#include "core/error.hpp"

namespace histograph::graph {

std::string feature_name(FeatureChannel channel) {
  switch (channel) {
    case FeatureChannel::ConstantOne: return "one";
    case FeatureChannel::NormalizedX: return "x";
    case FeatureChannel::NormalizedY: return "y";
    case FeatureChannel::Degree: return "degree";
  }
  return "?";
}

std::vector<FeatureChannel> parse_feature_recipe(std::string_view recipe) {
  if (recipe.empty() || recipe == "default") return GraphBuildConfig{}.features;
  std::vector<FeatureChannel> out;
  std::size_t pos = 0;
  while (pos <= recipe.size()) {
    const std::size_t comma = std::min(recipe.find(',', pos), recipe.size());
    const auto token = recipe.substr(pos, comma - pos);
    if (token == "one") out.push_back(FeatureChannel::ConstantOne);
    else if (token == "x") out.push_back(FeatureChannel::NormalizedX);
    else if (token == "y") out.push_back(FeatureChannel::NormalizedY);
    else if (token == "degree") out.push_back(FeatureChannel::Degree);
    else fail(ErrorKind::Validation, "unknown feature channel '" + std::string(token) + "'");
    pos = comma + 1;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(i), out[i]) != out.begin() + static_cast<std::ptrdiff_t>(i)) {
      fail(ErrorKind::Validation, "feature channel '" + feature_name(out[i]) + "' listed twice");
    }
  }
  return out;
}

bool NucleusGraph::has_edge(std::size_t i, std::size_t j) const {
  const std::size_t channels = edge_channels();
  for (std::size_t l = 0; l < channels; ++l) {
    if (adjacency.at(i, j, l) != 0.0) return true;
  }
  return false;
}

double euclidean_distance(const NucleusRecord& a, const NucleusRecord& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

NucleusGraph build_graph(std::span<const NucleusRecord> nuclei, const GraphBuildConfig& config) {
  if (nuclei.empty()) fail(ErrorKind::EmptyInput, "no nuclei");
  if (!(config.distance_threshold > 0.0) || !std::isfinite(config.distance_threshold)) {
    fail(ErrorKind::Validation, "distance threshold must be positive");
  }
  if (config.features.empty()) fail(ErrorKind::Validation, "feature recipe is empty");
  {
    std::unordered_set<std::int64_t> seen;
    for (const auto& r : nuclei) {
      if (!seen.insert(r.id).second) fail(ErrorKind::Validation, "duplicate nucleus id " + std::to_string(r.id));
      if (!std::isfinite(r.x) || !std::isfinite(r.y) || r.x < 0.0 || r.y < 0.0) {
        fail(ErrorKind::Validation, "nucleus " + std::to_string(r.id) + " has invalid coordinates");
      }
    }
  }

  const std::size_t n = nuclei.size();
  const double threshold = config.distance_threshold;
  NucleusGraph g;
  g.n = n;
  g.adjacency = Tensor({n, n, 1}, 0.0);
  g.centroids = Tensor({n, 2}, 0.0);
  std::vector<std::size_t> degree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    g.centroids.at(i, 0) = nuclei[i].x;
    g.centroids.at(i, 1) = nuclei[i].y;
    g.ids.push_back(nuclei[i].id);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = euclidean_distance(nuclei[i], nuclei[j]);
      if (d < threshold) {
        const double w = 1.0 - d / threshold;
        g.adjacency.at(i, j, 0) = w;
        g.adjacency.at(j, i, 0) = w;
        ++degree[i];
        ++degree[j];
      }
    }
  }

  double min_x = nuclei[0].x, max_x = nuclei[0].x, min_y = nuclei[0].y, max_y = nuclei[0].y;
  for (const auto& r : nuclei) {
    min_x = std::min(min_x, r.x);
    max_x = std::max(max_x, r.x);
    min_y = std::min(min_y, r.y);
    max_y = std::max(max_y, r.y);
  }
  const auto normalize = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };

  const std::size_t f = config.features.size();
  g.vertex_features = Tensor({n, f}, 0.0);
  for (std::size_t c = 0; c < f; ++c) {
    g.feature_names.push_back(feature_name(config.features[c]));
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      switch (config.features[c]) {
        case FeatureChannel::ConstantOne: v = 1.0; break;
        case FeatureChannel::NormalizedX: v = normalize(nuclei[i].x, min_x, max_x); break;
        case FeatureChannel::NormalizedY: v = normalize(nuclei[i].y, min_y, max_y); break;
        case FeatureChannel::Degree: v = static_cast<double>(degree[i]); break;
      }
      g.vertex_features.at(i, c) = v;
    }
  }
  return g;
}

void validate(const NucleusGraph& g) {
  if (g.n == 0) fail(ErrorKind::EmptyInput, "graph has no nodes");
  const auto& vs = g.vertex_features.shape();
  const auto& as = g.adjacency.shape();
  const auto& cs = g.centroids.shape();
  if (vs.size() != 2 || vs[0] != g.n) fail(ErrorKind::Validation, "vertex feature rows must equal node count");
  if (as.size() != 3 || as[0] != g.n || as[1] != g.n) fail(ErrorKind::Validation, "adjacency must be N x N x L");
  if (cs.size() != 2 || cs[0] != g.n || cs[1] != 2) fail(ErrorKind::Validation, "centroids must be N x 2");
  if (g.feature_names.size() != vs[1]) fail(ErrorKind::Validation, "feature_names length must equal F");
  if (g.ids.size() != g.n) fail(ErrorKind::Validation, "ids length must equal node count");
  if (!g.vertex_features.all_finite() || !g.adjacency.all_finite() || !g.centroids.all_finite()) {
    fail(ErrorKind::Validation, "graph contains non-finite values");
  }
  const std::size_t channels = as[2];
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t l = 0; l < channels; ++l) {
      if (g.adjacency.at(i, i, l) != 0.0) fail(ErrorKind::Validation, "adjacency diagonal must be zero");
    }
    for (std::size_t j = i + 1; j < g.n; ++j) {
      for (std::size_t l = 0; l < channels; ++l) {
        if (g.adjacency.at(i, j, l) != g.adjacency.at(j, i, l)) {
          fail(ErrorKind::Validation, "adjacency must be symmetric");
        }
      }
    }
  }
}

std::vector<std::size_t> neighbors_within(const NucleusGraph& g, std::size_t center, std::size_t hops) {
  if (center >= g.n) {
    fail(ErrorKind::Bounds, "node index " + std::to_string(center) + " out of range for " + std::to_string(g.n) +
                                " nodes");
  }
  std::vector<std::size_t> depth(g.n, static_cast<std::size_t>(-1));
  std::deque<std::size_t> frontier{center};
  depth[center] = 0;
  std::vector<std::size_t> ball{center};
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop_front();
    if (depth[u] == hops) continue;
    for (std::size_t v = 0; v < g.n; ++v) {
      if (depth[v] != static_cast<std::size_t>(-1) || v == u || !g.has_edge(u, v)) continue;
      depth[v] = depth[u] + 1;
      ball.push_back(v);
      frontier.push_back(v);
    }
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

NucleusGraph occlude(const NucleusGraph& g, std::size_t center, std::size_t hops) {
  if (hops < 1) fail(ErrorKind::Validation, "occlusion needs hops >= 1");
  const auto ball = neighbors_within(g, center, hops);
  NucleusGraph out = g;
  const std::size_t f = g.feature_count();
  const std::size_t channels = g.edge_channels();
  for (std::size_t u : ball) {
    for (std::size_t c = 0; c < f; ++c) out.vertex_features.at(u, c) = 0.0;
    for (std::size_t v = 0; v < g.n; ++v) {
      for (std::size_t l = 0; l < channels; ++l) {
        out.adjacency.at(u, v, l) = 0.0;
        out.adjacency.at(v, u, l) = 0.0;
      }
    }
  }
  return out;
}

GraphStats graph_stats(const NucleusGraph& g) {
  GraphStats s;
  s.nodes = g.n;
  double weight_total = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      if (!g.has_edge(i, j)) continue;
      ++s.edges;
      weight_total += g.adjacency.at(i, j, 0);
    }
  }
  s.mean_degree = g.n ? 2.0 * static_cast<double>(s.edges) / static_cast<double>(g.n) : 0.0;
  s.mean_edge_weight = s.edges ? weight_total / static_cast<double>(s.edges) : 0.0;
  return s;
}

NucleusGraph permute(const NucleusGraph& g, std::span<const std::size_t> perm) {
  if (perm.size() != g.n) fail(ErrorKind::Validation, "permutation length must equal node count");
  NucleusGraph out = g;
  const std::size_t f = g.feature_count();
  const std::size_t channels = g.edge_channels();
  for (std::size_t k = 0; k < g.n; ++k) {
    const std::size_t src = perm[k];
    if (src >= g.n) fail(ErrorKind::Bounds, "permutation entry out of range");
    out.ids[k] = g.ids[src];
    for (std::size_t c = 0; c < f; ++c) out.vertex_features.at(k, c) = g.vertex_features.at(src, c);
    out.centroids.at(k, 0) = g.centroids.at(src, 0);
    out.centroids.at(k, 1) = g.centroids.at(src, 1);
    for (std::size_t m = 0; m < g.n; ++m) {
      for (std::size_t l = 0; l < channels; ++l) out.adjacency.at(k, m, l) = g.adjacency.at(src, perm[m], l);
    }
  }
  return out;
}

}  // namespace histograph::graph

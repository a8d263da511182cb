#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "graph/graph.hpp"
#include "model/model.hpp"

namespace histograph::explain {

using graph::NucleusGraph;
using model::Model;

enum class Method { Occlusion, Attention };

std::string method_name(Method m);

struct ImportanceMap {
  Method method = Method::Occlusion;
  std::size_t target_class = 0;
  std::size_t hops = 0;  // occlusion only
  std::vector<double> raw;
  std::vector<double> normalized;  // min-max to [0, 1]; all 0.5 when flat
};

std::vector<double> normalize_scores(std::span<const double> raw);

// score_i = p(G) - p(G with the hops-ball around i occluded), where p is the
// probability of the class predicted on the intact graph.  Raw scores stay
// signed.  Node evaluations are independent and run on `threads` workers
// (0 = hardware concurrency); results do not depend on the thread count.
ImportanceMap occlusion_scores(const Model& model, const NucleusGraph& g, std::size_t hops = 1,
                               unsigned threads = 0);

// The attention gate's node softmax.  Unsupported for variants without a gate.
ImportanceMap attention_scores(const Model& model, const NucleusGraph& g);

struct ScoreRow {
  std::int64_t node_id = 0;
  double x = 0.0;
  double y = 0.0;
  double raw = 0.0;
  double normalized = 0.0;
};

std::string scores_to_csv(const ImportanceMap& map, const NucleusGraph& g);
void export_scores(const ImportanceMap& map, const NucleusGraph& g, const std::string& path);
std::vector<ScoreRow> parse_scores_csv(std::istream& in);
std::vector<ScoreRow> read_scores_csv(const std::string& path);

}  // namespace histograph::explain

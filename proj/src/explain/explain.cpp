#include "explain/explain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>

#include <fmt/format.h>

#include "core/error.hpp"
#include "core/parallel.hpp"

namespace histograph::explain {

std::string method_name(Method m) { return m == Method::Occlusion ? "occlusion" : "attention"; }

std::vector<double> normalize_scores(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.5);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  if (!(*hi > *lo)) return out;
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::clamp((raw[i] - *lo) / range, 0.0, 1.0);
  return out;
}

namespace {

// Probability mass outside class t, evaluated in log space.  p_t(G) - p_t(G')
// equals off_target(G') - off_target(G), and the right-hand side keeps its
// digits when p_t is within a few ulps of 1, where the direct difference
// cancels to zero.
double off_target_mass(std::span<const double> logits, std::size_t t) {
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) top = std::max(top, z);
  double all = 0.0, others = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double e = std::exp(logits[c] - top);
    all += e;
    if (c != t) others += e;
  }
  return others / all;
}

}  // namespace

ImportanceMap occlusion_scores(const Model& model, const NucleusGraph& g, std::size_t hops, unsigned threads) {
  if (hops < 1) fail(ErrorKind::Validation, "occlusion needs hops >= 1");
  const auto base = model.forward(nullptr, g).logits.value();
  ImportanceMap map;
  map.method = Method::Occlusion;
  map.hops = hops;
  map.target_class = model::argmax_lowest(base.data());
  const double reference = off_target_mass(base.data(), map.target_class);
  map.raw.assign(g.n, 0.0);
  parallel_for(g.n, threads, [&](std::size_t i) {
    double q = 0.0;
    try {
      q = off_target_mass(model.forward(nullptr, graph::occlude(g, i, hops)).logits.value().data(), map.target_class);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Numeric) {
        fail(ErrorKind::Numeric, "occluding node " + std::to_string(i) + ": " + e.what());
      }
      throw;
    }
    map.raw[i] = q - reference;
  });
  map.normalized = normalize_scores(map.raw);
  return map;
}

ImportanceMap attention_scores(const Model& model, const NucleusGraph& g) {
  if (model.spec().variant != model::Variant::RsfAttention) {
    fail(ErrorKind::Unsupported, "attention scores need an rsf-attention model, got " +
                                     model::variant_name(model.spec().variant));
  }
  auto p = model.predict(g);
  ImportanceMap map;
  map.method = Method::Attention;
  map.target_class = p.predicted_class;
  map.raw = std::move(*p.attention);
  map.normalized = normalize_scores(map.raw);
  return map;
}

std::string scores_to_csv(const ImportanceMap& map, const NucleusGraph& g) {
  if (map.raw.size() != g.n || map.normalized.size() != g.n) {
    fail(ErrorKind::Shape, "importance map has " + std::to_string(map.raw.size()) + " scores for " +
                               std::to_string(g.n) + " nodes");
  }
  std::string out = "node_id,x,y,raw_score,normalized_score\n";
  for (std::size_t i = 0; i < g.n; ++i) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", g.ids[i], g.centroids.at(i, 0), g.centroids.at(i, 1),
                       map.raw[i], map.normalized[i]);
  }
  return out;
}

void export_scores(const ImportanceMap& map, const NucleusGraph& g, const std::string& path) {
  const std::string text = scores_to_csv(map, g);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

namespace {

template <typename T>
bool parse_field(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::vector<ScoreRow> parse_scores_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "node_id,x,y,raw_score,normalized_score") {
        fail(ErrorKind::Validation, fmt::format("line {}: unexpected score CSV header", line_no));
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    ScoreRow r;
    if (fields.size() != 5 || !parse_field(fields[0], r.node_id) || !parse_field(fields[1], r.x) ||
        !parse_field(fields[2], r.y) || !parse_field(fields[3], r.raw) || !parse_field(fields[4], r.normalized)) {
      fail(ErrorKind::Validation, fmt::format("line {}: malformed score row", line_no));
    }
    rows.push_back(r);
  }
  if (!header_seen) fail(ErrorKind::Validation, "score CSV is empty");
  return rows;
}

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return parse_scores_csv(in);
}

}  // namespace histograph::explain

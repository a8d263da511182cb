#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "core/error.hpp"
#include "graph/graph.hpp"

namespace histograph::graph {

namespace {

using nlohmann::json;

void strip_line_ending(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename T>
bool parse_field(std::string_view text, T& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

}  // namespace

std::vector<NucleusRecord> parse_centroids_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<NucleusRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    strip_line_ending(line);
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "id,x,y") fail(ErrorKind::Validation, fmt::format("line {}: expected header 'id,x,y'", line_no));
      header_seen = true;
      continue;
    }
    const auto fields = split_commas(line);
    NucleusRecord r;
    if (fields.size() != 3 || !parse_field(fields[0], r.id) || !parse_field(fields[1], r.x) ||
        !parse_field(fields[2], r.y)) {
      fail(ErrorKind::Validation, fmt::format("line {}: malformed row '{}'", line_no, line));
    }
    records.push_back(r);
  }
  if (records.empty()) fail(ErrorKind::EmptyInput, "no nuclei");
  return records;
}

std::vector<NucleusRecord> read_centroids_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return parse_centroids_csv(in);
}

void write_centroids_csv(const std::string& path, std::span<const NucleusRecord> nuclei) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << "id,x,y\n";
  for (const auto& r : nuclei) out << fmt::format("{},{:.17g},{:.17g}\n", r.id, r.x, r.y);
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

std::string graph_to_json(const NucleusGraph& g) {
  json doc;
  doc["n"] = g.n;
  doc["feature_names"] = g.feature_names;
  json rows = json::array();
  for (std::size_t i = 0; i < g.n; ++i) {
    json row = json::array();
    for (std::size_t c = 0; c < g.feature_count(); ++c) row.push_back(g.vertex_features.at(i, c));
    rows.push_back(std::move(row));
  }
  doc["V"] = std::move(rows);
  json triplets = json::array();
  const std::size_t channels = g.edge_channels();
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      for (std::size_t l = 0; l < channels; ++l) {
        const double w = g.adjacency.at(i, j, l);
        if (w != 0.0) triplets.push_back(json::array({i, j, l, w}));
      }
    }
  }
  doc["A_sparse"] = std::move(triplets);
  doc["edge_channels"] = channels;
  json centroids = json::array();
  for (std::size_t i = 0; i < g.n; ++i) centroids.push_back(json::array({g.centroids.at(i, 0), g.centroids.at(i, 1)}));
  doc["centroids"] = std::move(centroids);
  doc["ids"] = g.ids;
  doc["label"] = g.label ? json(*g.label) : json(nullptr);
  return doc.dump();
}

NucleusGraph graph_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("graph JSON: ") + e.what());
  }
  try {
    NucleusGraph g;
    g.n = doc.at("n").get<std::size_t>();
    if (g.n == 0) fail(ErrorKind::EmptyInput, "no nuclei");
    g.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const auto& rows = doc.at("V");
    if (rows.size() != g.n) fail(ErrorKind::Validation, "graph JSON: V must have n rows");
    const std::size_t f = g.feature_names.size();
    if (f == 0) fail(ErrorKind::Validation, "graph JSON: no feature channels");
    g.vertex_features = Tensor({g.n, f}, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
      if (rows[i].size() != f) fail(ErrorKind::Validation, "graph JSON: V row width must match feature_names");
      for (std::size_t c = 0; c < f; ++c) g.vertex_features.at(i, c) = rows[i][c].get<double>();
    }

    const auto& triplets = doc.at("A_sparse");
    std::size_t channels = doc.value("edge_channels", std::size_t{0});
    if (channels == 0) {
      channels = 1;
      for (const auto& t : triplets) channels = std::max(channels, t.at(2).get<std::size_t>() + 1);
    }
    g.adjacency = Tensor({g.n, g.n, channels}, 0.0);
    for (const auto& t : triplets) {
      if (t.size() != 4) fail(ErrorKind::Validation, "graph JSON: A_sparse entries are [i, j, l, w]");
      const auto i = t[0].get<std::size_t>();
      const auto j = t[1].get<std::size_t>();
      const auto l = t[2].get<std::size_t>();
      const double w = t[3].get<double>();
      if (!(i < j) || j >= g.n || l >= channels) fail(ErrorKind::Validation, "graph JSON: bad A_sparse index");
      g.adjacency.at(i, j, l) = w;
      g.adjacency.at(j, i, l) = w;
    }

    const auto& cents = doc.at("centroids");
    if (cents.size() != g.n) fail(ErrorKind::Validation, "graph JSON: centroids must have n rows");
    g.centroids = Tensor({g.n, 2}, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
      g.centroids.at(i, 0) = cents[i].at(0).get<double>();
      g.centroids.at(i, 1) = cents[i].at(1).get<double>();
    }
    if (doc.contains("ids")) {
      g.ids = doc["ids"].get<std::vector<std::int64_t>>();
    } else {
      for (std::size_t i = 0; i < g.n; ++i) g.ids.push_back(static_cast<std::int64_t>(i));
    }
    const auto& label = doc.at("label");
    if (!label.is_null()) g.label = label.get<int>();
    validate(g);
    return g;
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("graph JSON: ") + e.what());
  }
}

void save_graph(const NucleusGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << graph_to_json(g) << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

NucleusGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return graph_from_json(buffer.str());
}

}  // namespace histograph::graph

#include "cli/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "core/error.hpp"
#include "numerics/rng.hpp"

namespace histograph::cli {

namespace fs = std::filesystem;

std::string synth_class_name(SynthClass c) { return c == SynthClass::Ring ? "ring" : "scatter"; }

SynthClass parse_synth_class(std::string_view name) {
  if (name == "ring") return SynthClass::Ring;
  if (name == "scatter") return SynthClass::Scatter;
  fail(ErrorKind::Validation, "unknown synthetic class '" + std::string(name) + "'");
}

void SyntheticConfig::validate() const {
  if (min_nuclei < 10 || max_nuclei < min_nuclei) fail(ErrorKind::Validation, "nucleus count range must start at 10 or more");
  if (!(field_size > 0.0)) fail(ErrorKind::Validation, "field size must be positive");
  if (!(ring_radius > 0.0) || !(ring_radius + ring_jitter < field_size / 2.0)) {
    fail(ErrorKind::Validation, "ring radius plus jitter must stay below half the field size");
  }
  if (!(ring_fraction > 0.0 && ring_fraction <= 1.0)) fail(ErrorKind::Validation, "ring fraction must lie in (0, 1]");
}

SyntheticSample generate_sample(const SyntheticConfig& config) {
  config.validate();
  numerics::SplitMix64 rng(config.seed);
  const auto n = static_cast<std::size_t>(rng.integer(config.min_nuclei, config.max_nuclei));
  SyntheticSample s;
  s.nuclei.reserve(n);
  s.on_ring.reserve(n);
  std::size_t on_ring = 0;
  if (config.cls == SynthClass::Ring) {
    on_ring = static_cast<std::size_t>(std::lround(config.ring_fraction * static_cast<double>(n)));
    const double reach = config.ring_radius + config.ring_jitter;
    const double cx = rng.uniform(reach, config.field_size - reach);
    const double cy = rng.uniform(reach, config.field_size - reach);
    for (std::size_t i = 0; i < on_ring; ++i) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = config.ring_radius + rng.uniform(-config.ring_jitter, config.ring_jitter);
      s.nuclei.push_back({static_cast<std::int64_t>(i), cx + r * std::cos(angle), cy + r * std::sin(angle)});
      s.on_ring.push_back(true);
    }
  }
  for (std::size_t i = on_ring; i < n; ++i) {
    s.nuclei.push_back({static_cast<std::int64_t>(i), rng.uniform(0.0, config.field_size),
                        rng.uniform(0.0, config.field_size)});
    s.on_ring.push_back(false);
  }
  return s;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<ManifestEntry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "path,label") fail(ErrorKind::Validation, fmt::format("{}:{}: expected header 'path,label'", path, line_no));
      header_seen = true;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) {
      fail(ErrorKind::Validation, fmt::format("{}:{}: malformed manifest row", path, line_no));
    }
    ManifestEntry e;
    e.path = line.substr(0, comma);
    try {
      std::size_t used = 0;
      e.label = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, fmt::format("{}:{}: label must be an integer", path, line_no));
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) fail(ErrorKind::EmptyInput, "manifest " + path + " lists no graphs");
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << "path,label\n";
  for (const auto& e : entries) out << e.path << ',' << e.label << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

std::vector<SynthSetItem> generate_set(const SynthSetConfig& config) {
  if (config.count_per_class < 1) fail(ErrorKind::Validation, "count per class must be at least 1");
  if (config.classes.empty()) fail(ErrorKind::Validation, "no synthetic classes requested");
  numerics::SplitMix64 master(config.seed);
  std::vector<SynthSetItem> items;
  for (std::size_t c = 0; c < config.classes.size(); ++c) {
    for (std::size_t k = 0; k < config.count_per_class; ++k) {
      SyntheticConfig shape = config.shape;
      shape.cls = config.classes[c];
      shape.seed = master.next();
      items.push_back({generate_sample(shape), static_cast<int>(c),
                       fmt::format("{}_{:04d}", synth_class_name(shape.cls), k)});
    }
  }
  return items;
}

std::vector<ManifestEntry> write_synthetic_set(const std::string& out_dir, const SynthSetConfig& config) {
  const auto items = generate_set(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) fail(ErrorKind::Io, "cannot create directory " + out_dir);
  std::vector<ManifestEntry> entries;
  for (const auto& item : items) {
    const std::string file = item.name + ".csv";
    graph::write_centroids_csv((fs::path(out_dir) / file).string(), item.sample.nuclei);
    entries.push_back({file, item.label});
  }
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), entries);
  return entries;
}

std::vector<graph::NucleusGraph> load_dataset(const std::string& manifest_path,
                                             const graph::GraphBuildConfig& build) {
  const auto entries = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<graph::NucleusGraph> graphs;
  graphs.reserve(entries.size());
  for (const auto& e : entries) {
    const fs::path p = fs::path(e.path).is_absolute() ? fs::path(e.path) : base / e.path;
    graph::NucleusGraph g = p.extension() == ".json" ? graph::load_graph(p.string())
                                                     : graph::build_graph(graph::read_centroids_csv(p.string()), build);
    g.label = e.label;
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace histograph::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graph/graph.hpp"

namespace histograph::cli {

enum class SynthClass { Ring, Scatter };

std::string synth_class_name(SynthClass c);
SynthClass parse_synth_class(std::string_view name);

// RING: ring_fraction of the nuclei on a jittered circle, the rest uniform
// over the field.  SCATTER: every nucleus uniform over the field.
struct SyntheticConfig {
  SynthClass cls = SynthClass::Ring;
  std::size_t min_nuclei = 100;
  std::size_t max_nuclei = 250;
  double ring_radius = 300.0;  // pixels
  double ring_jitter = 15.0;
  double field_size = 1200.0;
  double ring_fraction = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSample {
  std::vector<graph::NucleusRecord> nuclei;
  std::vector<bool> on_ring;  // parallel to nuclei
};

SyntheticSample generate_sample(const SyntheticConfig& config);

struct ManifestEntry {
  std::string path;  // as written in the manifest
  int label = 0;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

struct SynthSetConfig {
  std::vector<SynthClass> classes{SynthClass::Ring, SynthClass::Scatter};  // index = label
  std::size_t count_per_class = 1;
  std::uint64_t seed = 0;
  SyntheticConfig shape;  // cls and seed are overridden per sample
};

struct SynthSetItem {
  SyntheticSample sample;
  int label = 0;
  std::string name;  // file stem
};

// Deterministic list of samples for a whole benchmark set.
std::vector<SynthSetItem> generate_set(const SynthSetConfig& config);

// Writes one centroid CSV per sample plus manifest.csv into out_dir.
std::vector<ManifestEntry> write_synthetic_set(const std::string& out_dir, const SynthSetConfig& config);

// Resolves manifest paths relative to the manifest's directory.  JSON entries
// are loaded as graphs; anything else is read as a centroid CSV and built
// with `build`.  Manifest labels override stored ones.
std::vector<graph::NucleusGraph> load_dataset(const std::string& manifest_path,
                                             const graph::GraphBuildConfig& build);

}  // namespace histograph::cli

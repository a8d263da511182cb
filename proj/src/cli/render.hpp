#pragma once

#include <span>
#include <string>

#include "graph/graph.hpp"

namespace histograph::cli {

// Fixed ramp: hue 240 (blue) at score 0 down to hue 0 (red) at score 1,
// full saturation and value, white background.
struct RenderConfig {
  double node_radius = 5.0;  // pixels
  double margin = 20.0;
  bool legend = true;
};

// "#rrggbb" for a normalized score; inputs are clamped to [0, 1].
std::string ramp_color(double score);

// One filled circle per nucleus at its centroid.  Byte-identical output for
// identical inputs.
std::string render_svg(const graph::NucleusGraph& g, std::span<const double> normalized, const RenderConfig& config);

}  // namespace histograph::cli

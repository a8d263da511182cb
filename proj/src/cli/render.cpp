#include "cli/render.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "core/error.hpp"

namespace histograph::cli {

namespace {

constexpr double kLegendWidth = 14.0;
constexpr double kLegendGap = 16.0;
constexpr double kLegendLabelSpace = 44.0;
constexpr int kLegendStops = 9;

}  // namespace

std::string ramp_color(double score) {
  const double s = std::isfinite(score) ? std::clamp(score, 0.0, 1.0) : 0.0;
  const double hue = 240.0 * (1.0 - s);
  const double sector = hue / 60.0;
  const double x = 1.0 - std::fabs(std::fmod(sector, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  if (sector < 1.0) { r = 1; g = x; }
  else if (sector < 2.0) { r = x; g = 1; }
  else if (sector < 3.0) { g = 1; b = x; }
  else if (sector < 4.0) { g = x; b = 1; }
  else { r = x; b = 1; }
  auto byte = [](double c) { return static_cast<int>(std::lround(c * 255.0)); };
  return fmt::format("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b));
}

std::string render_svg(const graph::NucleusGraph& g, std::span<const double> normalized, const RenderConfig& config) {
  if (normalized.size() != g.n) {
    fail(ErrorKind::Validation, "score count " + std::to_string(normalized.size()) + " does not match " +
                                    std::to_string(g.n) + " nodes");
  }
  if (g.n == 0) fail(ErrorKind::EmptyInput, "graph has no nodes to draw");
  if (!(config.node_radius > 0.0) || !(config.margin >= 0.0)) {
    fail(ErrorKind::Validation, "node radius must be positive and margin non-negative");
  }
  double min_x = g.centroids.at(0, 0), max_x = min_x, min_y = g.centroids.at(0, 1), max_y = min_y;
  for (std::size_t i = 0; i < g.n; ++i) {
    min_x = std::min(min_x, g.centroids.at(i, 0));
    max_x = std::max(max_x, g.centroids.at(i, 0));
    min_y = std::min(min_y, g.centroids.at(i, 1));
    max_y = std::max(max_y, g.centroids.at(i, 1));
  }
  const double pad = config.margin + config.node_radius;
  const double plot_w = max_x - min_x + 2.0 * pad;
  const double plot_h = max_y - min_y + 2.0 * pad;
  const double width = plot_w + (config.legend ? kLegendGap + kLegendWidth + kLegendLabelSpace : 0.0);
  const double height = std::max(plot_h, config.legend ? 120.0 : 0.0);

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.2f}\" height=\"{1:.2f}\" viewBox=\"0 0 {0:.2f} {1:.2f}\">\n",
      width, height);
  svg += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (config.legend) {
    svg += "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
    for (int k = 0; k < kLegendStops; ++k) {
      const double t = static_cast<double>(k) / (kLegendStops - 1);
      svg += fmt::format("<stop offset=\"{:.4f}\" stop-color=\"{}\"/>\n", t, ramp_color(t));
    }
    svg += "</linearGradient></defs>\n";
  }
  svg += "<g id=\"nuclei\">\n";
  for (std::size_t i = 0; i < g.n; ++i) {
    const double cx = g.centroids.at(i, 0) - min_x + pad;
    const double cy = g.centroids.at(i, 1) - min_y + pad;
    svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"{}\"/>\n", cx, cy, config.node_radius,
                       ramp_color(normalized[i]));
  }
  svg += "</g>\n";
  if (config.legend) {
    const double x = plot_w + kLegendGap;
    const double top = config.margin;
    const double bar_h = height - 2.0 * config.margin;
    svg += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"url(#ramp)\" stroke=\"#000000\" "
        "stroke-width=\"0.5\"/>\n",
        x, top, kLegendWidth, bar_h);
    const double label_x = x + kLegendWidth + 4.0;
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\">1</text>\n",
                       label_x, top + 8.0);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n",
                       label_x, top + bar_h);
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace histograph::cli

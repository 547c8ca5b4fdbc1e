#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace braingraph {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> err;  // empty, or one half-width per point
};

struct PlotLabels {
  std::string title, x_axis, y_axis;
};

// Standalone SVG: one polyline per series with error whiskers, a legend and linear axes.
// Output bytes depend only on the input. Throws ConfigurationError on empty or ragged series.
std::string render_plot(const std::vector<PlotSeries>& series, const PlotLabels& labels);
void emit_plot(const std::filesystem::path& path, const std::vector<PlotSeries>& series, const PlotLabels& labels);

}  // namespace braingraph

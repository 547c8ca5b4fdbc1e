#include "braingraph/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "braingraph/errors.hpp"

namespace braingraph {

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity(), hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

}  // namespace

std::string render_plot(const std::vector<PlotSeries>& series, const PlotLabels& labels) {
  if (series.empty()) throw ConfigurationError("plot needs at least one series");
  Range xr, yr;
  for (const auto& s : series) {
    if (s.x.empty()) throw ConfigurationError("plot series '" + s.name + "' is empty");
    if (s.x.size() != s.y.size()) throw ConfigurationError("plot series '" + s.name + "' has unequal x and y lengths");
    if (!s.err.empty() && s.err.size() != s.y.size()) {
      throw ConfigurationError("plot series '" + s.name + "' has the wrong number of error values");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) throw ConfigurationError("plot values must be finite");
      const double e = s.err.empty() ? 0.0 : std::abs(s.err[i]);
      xr.add(s.x[i]);
      yr.add(s.y[i] - e);
      yr.add(s.y[i] + e);
    }
  }
  xr.pad();
  yr.pad();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
         "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(labels.title) + "</text>\n";
  svg += "<g stroke=\"black\" fill=\"none\">\n";
  svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop + ph) + "\" x2=\"" + fmt(kLeft + pw) + "\" y2=\"" +
         fmt(kTop + ph) + "\"/>\n";
  svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" + fmt(kTop + ph) +
         "\"/>\n";
  svg += "</g>\n<g font-size=\"10\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0, yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    svg += "<text x=\"" + fmt(px(xv)) + "\" y=\"" + fmt(kTop + ph + 16) + "\" text-anchor=\"middle\">" + tick(xv) +
           "</text>\n";
    svg += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(py(yv) + 3) + "\" text-anchor=\"end\">" + tick(yv) +
           "</text>\n";
  }
  svg += "</g>\n";
  svg += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 18) + "\" text-anchor=\"middle\">" +
         escape(labels.x_axis) + "</text>\n";
  svg += "<text transform=\"translate(18," + fmt(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(labels.y_axis) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string color = kColors[k % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) pts += ' ';
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    if (!s.err.empty()) {
      svg += "<g stroke=\"" + color + "\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double x = px(s.x[i]), lo = py(s.y[i] - s.err[i]), hi = py(s.y[i] + s.err[i]);
        svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(lo) + "\" x2=\"" + fmt(x) + "\" y2=\"" + fmt(hi) + "\"/>\n";
        svg += "<line x1=\"" + fmt(x - 3) + "\" y1=\"" + fmt(lo) + "\" x2=\"" + fmt(x + 3) + "\" y2=\"" + fmt(lo) + "\"/>\n";
        svg += "<line x1=\"" + fmt(x - 3) + "\" y1=\"" + fmt(hi) + "\" x2=\"" + fmt(x + 3) + "\" y2=\"" + fmt(hi) + "\"/>\n";
      }
      svg += "</g>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    svg += "<line x1=\"" + fmt(kLeft + pw + 15) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(kLeft + pw + 35) +
           "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt(kLeft + pw + 40) + "\" y=\"" + fmt(ly + 4) + "\">" + escape(s.name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(const std::filesystem::path& path, const std::vector<PlotSeries>& series, const PlotLabels& labels) {
  const std::string svg = render_plot(series, labels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << svg;
}

}  // namespace braingraph

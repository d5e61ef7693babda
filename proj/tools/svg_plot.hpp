#pragma once

// Minimal SVG scatter-plus-line plot for the planning fits. CSV remains
// the contract; this is a best-effort visual aid.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace persim::svg {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
  double line_slope = 0.0;
  double line_intercept = 0.0;
  bool has_line = false;
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline void write_plot(const std::filesystem::path& path,
                       const std::vector<Series>& series,
                       const std::string& x_label,
                       const std::string& y_label) {
  const int width = 720, height = 520;
  const int ml = 70, mr = 160, mt = 30, mb = 60;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  if (x_min >= x_max) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_min >= y_max) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double xpad = 0.05 * (x_max - x_min), ypad = 0.08 * (y_max - y_min);
  x_min -= xpad;
  x_max += xpad;
  y_min -= ypad;
  y_max += ypad;

  const auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
  };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
                                  "#7f7f7f"};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes with 6 ticks each
  out += "<g stroke=\"#333\" fill=\"none\"><path d=\"M" + fmt(px(x_min)) + " " +
         fmt(py(y_min)) + " H" + fmt(px(x_max)) + "\"/><path d=\"M" +
         fmt(px(x_min)) + " " + fmt(py(y_min)) + " V" + fmt(py(y_max)) +
         "\"/></g>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x_min + (x_max - x_min) * t / 5.0;
    const double yv = y_min + (y_max - y_min) * t / 5.0;
    out += "<text x=\"" + fmt(px(xv)) + "\" y=\"" +
           std::to_string(height - mb + 18) +
           "\" text-anchor=\"middle\">" + fmt(xv) + "</text>\n";
    out += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" +
           fmt(py(yv) + 4) + "\" text-anchor=\"end\">" + fmt(yv) + "</text>\n";
  }
  out += "<text x=\"" + std::to_string((ml + width - mr) / 2) + "\" y=\"" +
         std::to_string(height - 15) + "\" text-anchor=\"middle\">" + x_label +
         "</text>\n";
  out += "<text x=\"18\" y=\"" + std::to_string((mt + height - mb) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         std::to_string((mt + height - mb) / 2) + ")\">" + y_label +
         "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string color = kColors[i % 9];
    if (s.has_line) {
      const double ya = s.line_intercept + s.line_slope * x_min;
      const double yb = s.line_intercept + s.line_slope * x_max;
      out += "<path stroke=\"" + color + "\" fill=\"none\" d=\"M" +
             fmt(px(x_min)) + " " + fmt(py(ya)) + " L" + fmt(px(x_max)) + " " +
             fmt(py(yb)) + "\"/>\n";
    }
    for (const auto& [x, y] : s.points)
      out += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) +
             "\" r=\"3.5\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"" + std::to_string(width - mr + 14) + "\" y=\"" +
           std::to_string(mt + 18 + 18 * static_cast<int>(i)) + "\" fill=\"" +
           color + "\">" + s.label + "</text>\n";
  }
  out += "</svg>\n";

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << out;
}

}  // namespace persim::svg

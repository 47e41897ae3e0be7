#pragma once

#include <span>
#include <string>
#include <vector>

namespace lossforge {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 860;
  int height = 520;
};

/// Static line chart: one polyline per series, a legend entry per series and
/// labelled axes. Output bytes depend only on the inputs.
std::string render_svg(std::span<const Series> series, const PlotOptions& options);

}  // namespace lossforge

#pragma once

#include <string>
#include <vector>

namespace sarsfe {

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars, same length as y
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  int width = 720;
  int height = 480;
};

std::string svg_line_chart(const std::vector<LineSeries>& series, const ChartOptions& opts);

struct ScatterPoint {
  double x;
  double y;
  std::string group;
};

/// One colour per distinct group, listed in a legend.
std::string svg_scatter(const std::vector<ScatterPoint>& points, const ChartOptions& opts);

}  // namespace sarsfe

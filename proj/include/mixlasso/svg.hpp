#pragma once

#include <string>
#include <vector>

namespace mixlasso {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG line plot, one <polyline> per series. Axes are logarithmic
/// when every value on them is positive.
std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace mixlasso

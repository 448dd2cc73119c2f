#include "mixlasso/svg.hpp"

#include "mixlasso/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mixlasso {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double map(double v) const {
    const double t = log ? std::log10(v) : v;
    return hi > lo ? (t - lo) / (hi - lo) : 0.5;
  }
};

Axis make_axis(const std::vector<PlotSeries>& series, bool use_x) {
  Axis axis;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  bool positive = true;
  for (const auto& s : series)
    for (double v : use_x ? s.x : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      positive = positive && v > 0.0;
    }
  if (!(lo <= hi)) return axis;
  axis.log = positive;
  axis.lo = positive ? std::log10(lo) : lo;
  axis.hi = positive ? std::log10(hi) : hi;
  if (axis.hi == axis.lo) {
    axis.lo -= 0.5;
    axis.hi += 0.5;
  }
  return axis;
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

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(const Axis& axis, double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", axis.log ? std::pow(10.0, t) : t);
  return buf;
}

}  // namespace

std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<PlotSeries>& series) {
  for (const auto& s : series)
    if (s.x.size() != s.y.size()) throw ShapeError("plot series '" + s.name + "' has x/y mismatch");
  const Axis ax = make_axis(series, true);
  const Axis ay = make_axis(series, false);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.map(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.map(v)) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
         fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(title) + "</text>\n";
  out += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) +
         "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = ax.lo + (ax.hi - ax.lo) * t / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * t / 4.0;
    const double gx = kLeft + pw * t / 4.0;
    const double gy = kTop + ph * (1.0 - t / 4.0);
    out += "<text x=\"" + fmt(gx) + "\" y=\"" + fmt(kTop + ph + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + tick_label(ax, fx) + "</text>\n";
    out += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(gy + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + tick_label(ay, fy) + "</text>\n";
  }
  out += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 10) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape(x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + fmt(kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"13\" "
         "transform=\"rotate(-90 16 " + fmt(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % (sizeof(kColors) / sizeof(kColors[0]))];
    std::string points;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      const double x = series[s].x[i];
      const double y = series[s].y[i];
      if (!std::isfinite(x) || !std::isfinite(y) || (ax.log && x <= 0) || (ay.log && y <= 0))
        continue;
      if (!points.empty()) points += ' ';
      points += fmt(px(x)) + "," + fmt(py(y));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(s);
    out += "<text x=\"" + fmt(kLeft + pw + 10) + "\" y=\"" + fmt(ly) + "\" font-size=\"12\" fill=\"" +
           color + "\">" + escape(series[s].name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mixlasso

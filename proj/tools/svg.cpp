// Minimal static SVG plotter: axes, ticks, polylines, point markers, legend.
// Coordinates print with fixed precision so identical inputs give identical
// bytes, which the replay guarantee relies on.

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "common.hpp"

namespace cli {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 24.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 56.0;

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;

  double place(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
  bool usable(double v) const {
    return std::isfinite(v) && (!log || v > 0.0);
  }
};

Axis fit_axis(const std::vector<Series>& series, bool log, bool take_x) {
  Axis axis;
  axis.log = log;
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      const double x = s.xs[i];
      const double y = s.ys[i];
      const double v = take_x ? x : y;
      // a point participates only if it will be drawable on both axes later;
      // filtering per-axis alone would stretch ranges toward dropped points
      if (!std::isfinite(x) || !std::isfinite(y) || !axis.usable(v)) continue;
      const double t = log ? std::log10(v) : v;
      lo = seen ? std::min(lo, t) : t;
      hi = seen ? std::max(hi, t) : t;
      seen = true;
    }
  }
  if (!seen) {
    lo = log ? 0.0 : 0.0;
    hi = log ? 1.0 : 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= log ? 0.5 : 1.0;
    hi += log ? 0.5 : 1.0;
  }
  const double pad = 0.04 * (hi - lo);
  axis.lo = lo - pad;
  axis.hi = hi + pad;
  return axis;
}

std::vector<double> linear_ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step =
      (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step;
       t += step) {
    ticks.push_back(std::fabs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

// Returned in transformed (log10) units for a log axis.
std::vector<double> axis_ticks(const Axis& axis) {
  if (!axis.log) return linear_ticks(axis.lo, axis.hi);
  std::vector<double> ticks;
  for (double d = std::ceil(axis.lo); d <= std::floor(axis.hi) + 1e-9;
       d += 1.0) {
    ticks.push_back(d);
  }
  if (ticks.size() < 2) return linear_ticks(axis.lo, axis.hi);
  return ticks;
}

std::string tick_label(const Axis& axis, double t) {
  const double value = axis.log ? std::pow(10.0, t) : t;
  return fmt(value, "%g");
}

}  // namespace

std::string Plot::render() const {
  const Axis ax = fit_axis(series, log_x, true);
  const Axis ay = fit_axis(series, log_y, false);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + ax.place(x) * plot_w; };
  const auto py = [&](double y) {
    return kHeight - kBottom - ay.place(y) * plot_h;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 "
     << fmt(kWidth, "%g") << " " << fmt(kHeight, "%g")
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\""
     << " font-size=\"15\">" << escape(title) << "</text>\n";

  for (double t : axis_ticks(ax)) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * plot_w;
    if (x < kLeft - 0.5 || x > kWidth - kRight + 0.5) continue;
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kTop) << "\" x2=\""
       << fmt(x) << "\" y2=\"" << fmt(kHeight - kBottom)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kHeight - kBottom + 16)
       << "\" text-anchor=\"middle\">" << tick_label(ax, t) << "</text>\n";
  }
  for (double t : axis_ticks(ay)) {
    const double y = kHeight - kBottom - (t - ay.lo) / (ay.hi - ay.lo) * plot_h;
    if (y < kTop - 0.5 || y > kHeight - kBottom + 0.5) continue;
    os << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\""
       << fmt(kWidth - kRight) << "\" y2=\"" << fmt(y)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y + 4)
       << "\" text-anchor=\"end\">" << tick_label(ay, t) << "</text>\n";
  }

  os << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\""
     << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
     << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  os << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\""
     << fmt(kHeight - 12) << "\" text-anchor=\"middle\">" << escape(x_label)
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << fmt(kTop + plot_h / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << fmt(kTop + plot_h / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (const Series& s : series) {
    if (s.line) {
      std::string points;
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (!ax.usable(s.xs[i]) || !ay.usable(s.ys[i])) continue;
        points += fmt(px(s.xs[i])) + "," + fmt(py(s.ys[i])) + " ";
      }
      if (points.empty()) continue;
      points.pop_back();
      os << "<polyline points=\"" << points
         << "\" fill=\"none\" stroke=\"" << s.color
         << "\" stroke-width=\"1.5\"";
      if (s.dashed) os << " stroke-dasharray=\"6 4\"";
      os << "/>\n";
    } else {
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (!ax.usable(s.xs[i]) || !ay.usable(s.ys[i])) continue;
        os << "<circle cx=\"" << fmt(px(s.xs[i])) << "\" cy=\""
           << fmt(py(s.ys[i])) << "\" r=\"2.5\" fill=\"" << s.color
           << "\"/>\n";
      }
    }
  }

  double legend_y = kTop + 16;
  for (const Series& s : series) {
    if (s.label.empty()) continue;
    const double x0 = kWidth - kRight - 190;
    os << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(legend_y - 4)
       << "\" x2=\"" << fmt(x0 + 22) << "\" y2=\"" << fmt(legend_y - 4)
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"";
    if (s.dashed) os << " stroke-dasharray=\"6 4\"";
    os << "/>\n";
    os << "<text x=\"" << fmt(x0 + 28) << "\" y=\"" << fmt(legend_y) << "\">"
       << escape(s.label) << "</text>\n";
    legend_y += 16;
  }

  os << "</svg>\n";
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_failure("cannot open " + path + " for writing");
  os << text;
  os.flush();
  if (!os.good()) throw io_failure("write failed for " + path);
}

}  // namespace cli

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace ptflow::cli {

namespace svg_detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Round axis bounds outward to a tidy tick step (1/2/5 decades).
struct Axis {
  double lo = 0.0, hi = 1.0, step = 0.2;
  static Axis fit(double lo, double hi) {
    if (!(hi > lo)) hi = lo + 1.0;
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0})
      if (mag * m >= raw) {
        step = mag * m;
        break;
      }
    Axis a;
    a.step = step;
    a.lo = std::floor(lo / step) * step;
    a.hi = std::ceil(hi / step) * step;
    return a;
  }
};

}  // namespace svg_detail

/// Self-contained SVG line chart of every state coordinate against time:
/// first coordinate solid, the rest dashed with distinct patterns, optional
/// vertical marker at the prescribed horizon. No external assets and no
/// timestamps, so identical inputs render byte-identical files.
[[nodiscard]] inline std::string render_svg(const std::vector<double>& times,
                                            const Eigen::MatrixXd& states, double tp_marker,
                                            const std::string& title) {
  using svg_detail::Axis;
  using svg_detail::fmt;

  constexpr double W = 800, H = 500, ml = 70, mr = 150, mt = 45, mb = 55;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const auto N = static_cast<Eigen::Index>(times.size());
  const auto dims = states.cols();

  double ylo = states.minCoeff(), yhi = states.maxCoeff();
  if (ylo == yhi) {
    ylo -= 1.0;
    yhi += 1.0;
  }
  double xlo = times.front(), xhi = times.back();
  if (std::isfinite(tp_marker)) xhi = std::max(xhi, tp_marker);
  const Axis ax = Axis::fit(xlo, xhi), ay = Axis::fit(ylo, yhi);
  const auto X = [&](double t) { return ml + (t - ax.lo) / (ax.hi - ax.lo) * pw; };
  const auto Y = [&](double v) { return mt + ph - (v - ay.lo) / (ay.hi - ay.lo) * ph; };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  static const char* kDashes[] = {"", "9 5", "3 3", "9 3 2 3", "12 3", "6 2 2 2"};

  std::string out;
  out.reserve(1 << 16);
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
         "viewBox=\"0 0 800 500\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"800\" height=\"500\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + fmt("%.0f", ml) + "\" y=\"24\" font-size=\"15\">" + title + "</text>\n";

  // gridlines and ticks
  for (double v = ay.lo; v <= ay.hi + 1e-12 * std::abs(ay.step); v += ay.step) {
    const double y = Y(v);
    out += "<line x1=\"" + fmt("%.2f", ml) + "\" y1=\"" + fmt("%.2f", y) + "\" x2=\"" +
           fmt("%.2f", ml + pw) + "\" y2=\"" + fmt("%.2f", y) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + fmt("%.2f", ml - 8) + "\" y=\"" + fmt("%.2f", y + 4) +
           "\" text-anchor=\"end\">" + fmt("%.4g", v) + "</text>\n";
  }
  for (double t = ax.lo; t <= ax.hi + 1e-12 * std::abs(ax.step); t += ax.step) {
    const double x = X(t);
    out += "<line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.2f", mt) + "\" x2=\"" +
           fmt("%.2f", x) + "\" y2=\"" + fmt("%.2f", mt + ph) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", mt + ph + 18) +
           "\" text-anchor=\"middle\">" + fmt("%.4g", t) + "</text>\n";
  }
  out += "<rect x=\"" + fmt("%.2f", ml) + "\" y=\"" + fmt("%.2f", mt) + "\" width=\"" +
         fmt("%.2f", pw) + "\" height=\"" + fmt("%.2f", ph) +
         "\" fill=\"none\" stroke=\"#444444\"/>\n";
  out += "<text x=\"" + fmt("%.2f", ml + pw / 2) + "\" y=\"" + fmt("%.2f", H - 12) +
         "\" text-anchor=\"middle\">t</text>\n";

  if (std::isfinite(tp_marker)) {
    const double x = X(tp_marker);
    out += "<line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.2f", mt) + "\" x2=\"" +
           fmt("%.2f", x) + "\" y2=\"" + fmt("%.2f", mt + ph) +
           "\" stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"5 4\"/>\n";
    out += "<text x=\"" + fmt("%.2f", x + 4) + "\" y=\"" + fmt("%.2f", mt + 14) +
           "\" fill=\"#555555\">Tp</text>\n";
  }

  for (Eigen::Index d = 0; d < dims; ++d) {
    const char* color = kColors[d % 8];
    const char* dash = kDashes[d % 6];
    std::string pts;
    pts.reserve(static_cast<size_t>(N) * 16);
    for (Eigen::Index j = 0; j < N; ++j) {
      pts += fmt("%.2f", X(times[static_cast<size_t>(j)]));
      pts += ",";
      pts += fmt("%.2f", Y(states(j, d)));
      if (j + 1 < N) pts += " ";
    }
    out += "<polyline fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.8\"";
    if (dash[0] != '\0') out += std::string(" stroke-dasharray=\"") + dash + "\"";
    out += " points=\"" + pts + "\"/>\n";

    const double ly = mt + 16 + 18 * static_cast<double>(d);
    out += "<line x1=\"" + fmt("%.2f", ml + pw + 12) + "\" y1=\"" + fmt("%.2f", ly - 4) +
           "\" x2=\"" + fmt("%.2f", ml + pw + 40) + "\" y2=\"" + fmt("%.2f", ly - 4) +
           "\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.8\"";
    if (dash[0] != '\0') out += std::string(" stroke-dasharray=\"") + dash + "\"";
    out += "/>\n";
    out += "<text x=\"" + fmt("%.2f", ml + pw + 46) + "\" y=\"" + fmt("%.2f", ly) + "\">x" +
           std::to_string(d) + "</text>\n";
  }

  out += "</svg>\n";
  return out;
}

}  // namespace ptflow::cli

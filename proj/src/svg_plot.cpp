#include "evtol/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "evtol/metrics.hpp"

namespace evtol {
namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Round the step to a 1/2/5 x 10^k grid to get readable tick labels.
double nice_step(double span, int target_ticks) {
  if (span <= 0.0) return 1.0;
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  double step;
  if (frac <= 1.0) step = 1.0;
  else if (frac <= 2.0) step = 2.0;
  else if (frac <= 5.0) step = 5.0;
  else step = 10.0;
  return step * mag;
}

}  // namespace

std::string render_svg_plot(const PlotSpec& spec) {
  if (spec.series.empty()) throw std::invalid_argument("plot needs at least one series");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : spec.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x/y length mismatch: " + s.label);
    if (s.x.empty()) throw std::invalid_argument("empty series: " + s.label);
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  }
  if (!(std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) && std::isfinite(ymax))) {
    throw std::invalid_argument("plot data contains non-finite values");
  }
  if (xmax == xmin) { xmax += 0.5; xmin -= 0.5; }
  if (ymax == ymin) { ymax += 0.5; ymin -= 0.5; }
  // breathing room so curves don't sit on the frame
  const double xpad = 0.03 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  const double ml = 72, mr = 24, mt = 44, mb = 56;  // margins
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width << " "
      << spec.height << "\">\n";
  svg << "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  // grid + ticks
  const double xstep = nice_step(xmax - xmin, 6), ystep = nice_step(ymax - ymin, 6);
  svg << "  <g font-family=\"sans-serif\" font-size=\"12\" fill=\"#444444\">\n";
  for (double tx = std::ceil(xmin / xstep) * xstep; tx <= xmax + 1e-9 * xstep; tx += xstep) {
    const double gx = px(tx);
    svg << "    <line x1=\"" << num(gx) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(gx)
        << "\" y2=\"" << num(mt + ph) << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg << "    <text x=\"" << num(gx) << "\" y=\"" << num(mt + ph + 18)
        << "\" text-anchor=\"middle\">" << num(tx == 0.0 ? 0.0 : tx) << "</text>\n";
  }
  for (double ty = std::ceil(ymin / ystep) * ystep; ty <= ymax + 1e-9 * ystep; ty += ystep) {
    const double gy = py(ty);
    svg << "    <line x1=\"" << num(ml) << "\" y1=\"" << num(gy) << "\" x2=\"" << num(ml + pw)
        << "\" y2=\"" << num(gy) << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg << "    <text x=\"" << num(ml - 8) << "\" y=\"" << num(gy + 4)
        << "\" text-anchor=\"end\">" << num(ty == 0.0 ? 0.0 : ty) << "</text>\n";
  }
  svg << "  </g>\n";

  // frame
  svg << "  <rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";

  // series
  for (const PlotSeries& s : spec.series) {
    svg << "  <polyline fill=\"none\" stroke=\"" << escape_xml(s.color)
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) svg << ' ';
      svg << num(px(s.x[i])) << ',' << num(py(s.y[i]));
    }
    svg << "\"/>\n";
  }

  // labels + legend
  svg << "  <g font-family=\"sans-serif\" fill=\"#111111\">\n";
  svg << "    <text x=\"" << num(ml + pw / 2) << "\" y=\"24\" font-size=\"16\" "
      << "text-anchor=\"middle\" font-weight=\"bold\">" << escape_xml(spec.title) << "</text>\n";
  svg << "    <text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(spec.height - 14)
      << "\" font-size=\"13\" text-anchor=\"middle\">" << escape_xml(spec.x_label) << "</text>\n";
  svg << "    <text x=\"18\" y=\"" << num(mt + ph / 2) << "\" font-size=\"13\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 18 " << num(mt + ph / 2) << ")\">" << escape_xml(spec.y_label)
      << "</text>\n";
  double ly = mt + 14;
  for (const PlotSeries& s : spec.series) {
    if (s.label.empty()) continue;
    svg << "    <line x1=\"" << num(ml + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << num(ml + 36) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << escape_xml(s.color)
        << "\" stroke-width=\"2\"/>\n";
    svg << "    <text x=\"" << num(ml + 42) << "\" y=\"" << num(ly) << "\" font-size=\"12\">"
        << escape_xml(s.label) << "</text>\n";
    ly += 18;
  }
  svg << "  </g>\n</svg>\n";
  return svg.str();
}

void write_svg_plot(const std::string& path, const PlotSpec& spec) {
  write_file_atomic(path, render_svg_plot(spec));
}

}  // namespace evtol

#pragma once
// Minimal self-contained SVG line plots (no external tooling) for the
// trajectory figures: altitude vs. range and horizontal speed vs. time.

#include <string>
#include <vector>

namespace evtol {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 840;
  int height = 520;
  std::vector<PlotSeries> series;
};

// Renders the complete <svg> document.  Throws std::invalid_argument on
// empty/mismatched series.
std::string render_svg_plot(const PlotSpec& spec);

void write_svg_plot(const std::string& path, const PlotSpec& spec);

}  // namespace evtol

#pragma once

#include <string>
#include <vector>

namespace knpg::harness {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool markers = false;  // scatter instead of a polyline
  bool dashed = false;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<PlotSeries> series;
};

// Self-contained SVG. Non-finite points (and non-positive ones on log axes) are dropped.
std::string render_svg(const PlotSpec& spec);

// Number of legend entries in an SVG produced by render_svg.
int count_series_labels(const std::string& svg);

// Reads harness CSVs and writes one SVG per metric into out_dir; returns the files written.
// Throws ParseError with the offending line for malformed input.
std::vector<std::string> emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir);

}  // namespace knpg::harness

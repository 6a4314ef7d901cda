#include "knpg/harness/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "knpg/error.hpp"
#include "knpg/harness/csv.hpp"
#include "knpg/harness/rate_fit.hpp"

namespace knpg::harness {

namespace {

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
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

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  // in transformed units

  double tf(double v) const { return log ? std::log10(v) : v; }
  bool ok(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

void fit_range(Axis& ax, const std::vector<double>& vals) {
  double lo = INFINITY, hi = -INFINITY;
  for (double v : vals)
    if (ax.ok(v)) lo = std::min(lo, ax.tf(v)), hi = std::max(hi, ax.tf(v));
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    lo -= pad;
    hi += pad;
  }
  ax.lo = lo;
  ax.hi = hi;
}

std::vector<double> ticks(const Axis& ax) {
  std::vector<double> out;
  if (ax.log) {
    for (double e = std::ceil(ax.lo); e <= ax.hi + 1e-9; e += 1.0) out.push_back(e);
    if (out.size() < 2) out = {ax.lo, ax.hi};
    return out;
  }
  const double span = ax.hi - ax.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  for (double t = std::ceil(ax.lo / step) * step; t <= ax.hi + 1e-9 * span; t += step)
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  Axis ax{spec.log_x}, ay{spec.log_y};
  std::vector<double> xs, ys;
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (ax.ok(s.x[i]) && ay.ok(s.y[i])) xs.push_back(s.x[i]), ys.push_back(s.y[i]);
  fit_range(ax, xs);
  fit_range(ay, ys);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.tf(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.tf(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
    << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(spec.title) << "</text>\n";
  o << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\"/>\n</g>\n";
  o << "<g class=\"ticks\">\n";
  for (double t : ticks(ax)) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(kTop + ph + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(ax.log ? std::pow(10.0, t) : t) << "</text>\n";
  }
  for (double t : ticks(ay)) {
    const double y = kTop + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
    o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(y)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
      << tick_label(ay.log ? std::pow(10.0, t) : t) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 10) << "\" text-anchor=\"middle\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const PlotSeries& s = spec.series[si];
    const char* color = kColors[si % std::size(kColors)];
    o << "<g class=\"series\">\n";
    if (s.markers) {
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
        if (ax.ok(s.x[i]) && ay.ok(s.y[i]))
          o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
      bool first = true;
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!ax.ok(s.x[i]) || !ay.ok(s.y[i])) continue;
        o << (first ? "" : " ") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
        first = false;
      }
      o << "\"/>\n";
    }
    o << "</g>\n";
    const double ly = kTop + 12 + 16 * static_cast<double>(si);
    o << "<line x1=\"" << num(kLeft + pw + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(kLeft + pw + 30)
      << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text class=\"series-label\" x=\"" << num(kLeft + pw + 35) << "\" y=\"" << num(ly) << "\">"
      << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

int count_series_labels(const std::string& svg) {
  int n = 0;
  const std::string tag = "class=\"series-label\"";
  for (std::size_t p = svg.find(tag); p != std::string::npos; p = svg.find(tag, p + tag.size())) ++n;
  return n;
}

namespace {

bool any_finite(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string write_plot(const std::string& out_dir, const std::string& name, const PlotSpec& spec) {
  const std::string path = (std::filesystem::path(out_dir) / name).string();
  write_text_file(path, render_svg(spec));
  return path;
}

}  // namespace

std::vector<std::string> emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const std::string& path : csv_paths) {
    const CsvTable t = read_csv(path);
    const std::string stem = std::filesystem::path(path).stem().string();

    if (t.column("exponent") >= 0 && t.column("k") >= 0 && t.column("mean_gap") >= 0) {
      // Schedule sweep summary: one smoothed curve per exponent.
      const auto e = t.values("exponent"), k = t.values("k");
      for (const char* metric : {"gap", "reward"}) {
        const std::string col = std::string("smoothed_") + metric;
        if (t.column(col) < 0) continue;
        const auto v = t.values(col);
        if (!any_finite(v)) continue;
        std::map<double, PlotSeries> by_exp;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          PlotSeries& s = by_exp[e[i]];
          s.label = "a=" + tick_label(e[i]);
          s.x.push_back(k[i]);
          s.y.push_back(v[i]);
        }
        PlotSpec spec{std::string("smoothed ") + metric + " by step exponent", "outer iteration k", metric,
                      false, std::string(metric) == "gap", {}};
        for (auto& [_, s] : by_exp) spec.series.push_back(std::move(s));
        written.push_back(write_plot(out_dir, stem + "_" + metric + ".svg", spec));
      }
    } else if (t.column("k") >= 0 && (t.column("gap") >= 0 || t.column("reward_mean") >= 0)) {
      // Training log: raw and smoothed.
      const auto k = t.values("k");
      for (const auto& [col, label] : {std::pair{"gap", "gap"}, std::pair{"reward_mean", "reward"}}) {
        if (t.column(col) < 0) continue;
        const auto v = t.values(col);
        PlotSpec spec{stem + " " + label, "outer iteration k", label, false, false, {}};
        if (any_finite(v)) {
          spec.series.push_back({"raw", k, v, false, true});
          spec.series.push_back({"smoothed (60)", k, moving_average(v, 60), false, false});
        }
        written.push_back(write_plot(out_dir, stem + "_" + label + ".svg", spec));
      }
    } else if (t.column("n") >= 0 && t.column("median_error_n") >= 0) {
      const auto n = t.values("n"), err = t.values("median_error_n");
      PlotSpec spec{"TD error vs sample size", "n", "median ||f - Q||_n", true, true, {}};
      spec.series.push_back({"median error", n, err, true, false});
      if (n.size() >= 2) {
        const RateFit fit = fit_rate(n, err);
        std::vector<double> fy;
        for (double x : n) fy.push_back(std::exp(fit.intercept + fit.slope * std::log(x)));
        char lbl[64];
        std::snprintf(lbl, sizeof lbl, "fit slope %.3f", fit.slope);
        spec.series.push_back({lbl, n, fy, false, false});
      }
      written.push_back(write_plot(out_dir, stem + ".svg", spec));
    } else {
      // Anything else: every column against the first.
      PlotSpec spec{stem, t.header.front(), "value", false, false, {}};
      const auto x = t.values(t.header.front());
      for (std::size_t c = 1; c < t.header.size(); ++c) spec.series.push_back({t.header[c], x, t.values(t.header[c])});
      written.push_back(write_plot(out_dir, stem + ".svg", spec));
    }
  }
  return written;
}

}  // namespace knpg::harness

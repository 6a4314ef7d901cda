#include "knpg/harness/rate_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knpg/error.hpp"

namespace knpg::harness {

RateFit ols_fit(std::vector<std::pair<double, double>> points) {
  if (points.size() < 2) throw ConfigError("rate fit: need at least two points");
  const double m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : points) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw NumericalError("rate fit: non-finite point");
    sx += x;
    sy += y;
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0) throw NumericalError("rate fit: all x values coincide");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (const auto& [x, y] : points) {
    const double e = y - (f.intercept + f.slope * x);
    sse += e * e;
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  f.points = std::move(points);
  return f;
}

RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& err) {
  if (n.size() != err.size()) throw ConfigError("rate fit: size mismatch");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !(err[i] > 0.0)) throw NumericalError("rate fit: log of a non-positive value");
    pts.emplace_back(std::log(n[i]), std::log(err[i]));
  }
  return ols_fit(std::move(pts));
}

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lo + hi);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::vector<double> moving_average(const std::vector<double>& v, int window) {
  if (window < 1) throw ConfigError("moving average: window must be positive");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    // Running mean, so a constant window reproduces the constant exactly.
    double m = v[lo];
    for (std::size_t j = lo + 1; j <= i; ++j) m += (v[j] - m) / static_cast<double>(j - lo + 1);
    out[i] = m;
  }
  return out;
}

}  // namespace knpg::harness

#pragma once

#include <utility>
#include <vector>

namespace knpg::harness {

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log n, log error)
};

// OLS of y on x.
RateFit ols_fit(std::vector<std::pair<double, double>> points);
// Takes raw (n, error) pairs and fits in natural-log space.
RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& err);

double median(std::vector<double> v);
double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // population

// Trailing moving average; the first window-1 entries average what is available.
std::vector<double> moving_average(const std::vector<double>& v, int window);

}  // namespace knpg::harness

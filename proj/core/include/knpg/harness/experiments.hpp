#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "knpg/harness/config.hpp"
#include "knpg/harness/rate_fit.hpp"

namespace knpg::harness {

constexpr int kSmoothingWindow = 60;

// Every run_* writes into cfg.output_dir (with a copy of the resolved config) unless it is empty.

struct EvalRateRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double error_n = 0.0;      // ||f - Q^pi||_n on the batch
  double error_probe = 0.0;  // RMS over the oracle probe grid
  int td_iters = 0;
};

struct EvalRateResult {
  std::vector<EvalRateRow> rows;  // n-major, seeds in config order
  std::vector<std::size_t> n;
  std::vector<double> median_error_n, median_error_probe;
  RateFit fit, fit_probe;
};

EvalRateResult run_eval_rate(const ExperimentConfig& cfg);

struct TrainSummary {
  std::uint64_t seed = 0;
  double initial_gap = 0.0;
  double final_gap = 0.0;
  double min_gap = 0.0;  // over pi^0 .. pi^K
  bool bound_literal_holds = false;
  bool bound_corrected_holds = false;
  double first10_reward = 0.0;
  double last10_reward = 0.0;
};

TrainSummary summarize(const TrainingLog& log);

struct TrainResult {
  std::vector<TrainingLog> logs;  // seeds in config order
  std::vector<TrainSummary> summaries;
};

TrainResult run_train(const ExperimentConfig& cfg);

struct ExponentStats {
  double exponent = 0.0;
  double mean_final_gap = 0.0;
  double var_final_gap = 0.0;
  bool non_monotone = false;  // some seed's gap rises by more than 1e-3 of its initial gap
  std::vector<double> mean_gap, smoothed_gap, mean_reward, smoothed_reward;  // per k
};

struct SweepVerdict {
  bool available = false;  // needs exponents 0.2, 0.5 and 1.5
  bool half_beats_three_halves = false;
  bool fifth_unstable = false;
  bool half_best = false;
  std::string text;
};

struct SweepResult {
  std::vector<ExponentStats> stats;  // exponents in config order
  std::vector<std::vector<TrainingLog>> logs;
  SweepVerdict verdict;
};

SweepResult run_schedule_sweep(const ExperimentConfig& cfg);
SweepVerdict sweep_verdict(const std::vector<ExponentStats>& stats);

struct DiagnosticsResult {
  std::size_t n = 0;
  double lambda = 0.0;
  double closed_form_residual = 0.0;
  double condition_estimate = 0.0;
  ConvergenceTrace trace;
  double final_error = 0.0;      // ||f_T - closed form||_n
  double observed_ratio = 0.0;   // geometric rate fitted to the error trace
  double decomposition_relative = 0.0;
  bool decomposition_skipped = false;
  double bellman_mean = 0.0;     // mean Bellman residual of the exact Q on the batch
  double td_error_n = 0.0;       // ||f - Q^pi||_n
};

DiagnosticsResult run_diagnostics(const ExperimentConfig& cfg);

// exp of the OLS slope of log(error) over the trace tail where the error is above floor.
double geometric_ratio(const ConvergenceTrace& trace, double floor);

}  // namespace knpg::harness

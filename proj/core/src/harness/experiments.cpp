#include "knpg/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "knpg/error.hpp"
#include "knpg/harness/csv.hpp"

namespace knpg::harness {

using json = nlohmann::ordered_json;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// JSON has no NaN; write null instead.
json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void prepare_output(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) return;
  std::filesystem::create_directories(cfg.output_dir);
  write_text_file((std::filesystem::path(cfg.output_dir) / "config.resolved.json").string(), to_json_text(cfg));
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

// Runs body(i) for i in [0, count) on cfg.threads workers. Results go into caller-owned slots,
// so output order never depends on scheduling. The first exception (by index) is rethrown.
template <class F>
void parallel_tasks(int threads, std::size_t count, F body) {
  std::vector<std::exception_ptr> errors(count);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#else
  (void)threads;
#endif
  for (std::size_t i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::unique_ptr<MdpModel> environment_with_oracle(const ExperimentConfig& cfg, std::unique_ptr<PolicyOracle>& oracle,
                                                  bool required) {
  auto mdp = make_environment(cfg.environment);
  oracle = make_oracle(*mdp, cfg.diagnostics.oracle_grid);
  if (required && !oracle)
    throw ConfigError(to_string(cfg.kind) + ": environment '" + cfg.environment.name + "' has no exact oracle");
  return mdp;
}

std::shared_ptr<const Kernel> make_kernel(const ExperimentConfig& cfg, const MdpModel& mdp) {
  return std::make_shared<const Kernel>(cfg.kernel, mdp.feature_dim());
}

double pick_lambda(const ExperimentConfig& cfg, std::size_t n) {
  return cfg.npg.td.lambda > 0.0 ? cfg.npg.td.lambda : rate_lambda(cfg.npg.schedule, n);
}

struct Solved {
  std::shared_ptr<const QEstimate> q;
  int iters = 0;
};

Solved solve_td(const ExperimentConfig& cfg, const SampleBatch& batch, std::shared_ptr<const Kernel> kernel,
                double lambda, double gamma) {
  if (cfg.npg.td.mode == TdMode::ClosedForm) return {krr_td_closed_form(batch, kernel, lambda, gamma).q, 0};
  TdSolverConfig tc = cfg.npg.td;
  tc.lambda = lambda;
  tc.record_trace = false;
  IterateResult r = kernel_td_iterate(batch, kernel, gamma, tc);
  return {r.q, r.trace.iterations};
}

double probe_rms(const QEstimate& f, const QFunction& q, const PointSet& probes) {
  const Eigen::VectorXd d = f.evaluate(probes) - q(probes);
  return d.norm() / std::sqrt(static_cast<double>(d.size()));
}

}  // namespace

EvalRateResult run_eval_rate(const ExperimentConfig& cfg) {
  validate(cfg);
  std::unique_ptr<PolicyOracle> oracle;
  auto mdp = environment_with_oracle(cfg, oracle, true);
  auto kernel = make_kernel(cfg, *mdp);
  const SoftmaxPolicy pi(mdp->num_actions(), mdp->feature_dim());
  const QFunction Q = oracle->q_function(pi);
  prepare_output(cfg);

  EvalRateResult res;
  res.n = cfg.n_grid;
  const std::size_t S = cfg.seeds.size();
  res.rows.resize(cfg.n_grid.size() * S);
  parallel_tasks(cfg.threads, res.rows.size(), [&](std::size_t t) {
    const std::size_t n = cfg.n_grid[t / S];
    const std::uint64_t seed = cfg.seeds[t % S];
    CounterRng rng = CounterRng(seed).split(n);
    const SampleBatch batch = sample_batch(*mdp, pi, n, rng(), cfg.npg.sampling, "uniform");
    const double lambda = pick_lambda(cfg, n);
    const Solved s = solve_td(cfg, batch, kernel, lambda, mdp->discount());
    EvalRateRow& row = res.rows[t];
    row.n = n;
    row.seed = seed;
    row.lambda = lambda;
    row.error_n = empirical_distance(batch, as_function(s.q), Q);
    row.error_probe = probe_rms(*s.q, Q, oracle->probe_points());
    row.td_iters = s.iters;
  });

  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    std::vector<double> a, b;
    for (std::size_t j = 0; j < S; ++j) {
      a.push_back(res.rows[i * S + j].error_n);
      b.push_back(res.rows[i * S + j].error_probe);
    }
    res.median_error_n.push_back(median(a));
    res.median_error_probe.push_back(median(b));
  }
  std::vector<double> nd(res.n.begin(), res.n.end());
  res.fit = fit_rate(nd, res.median_error_n);
  res.fit_probe = fit_rate(nd, res.median_error_probe);

  if (!cfg.output_dir.empty()) {
    std::ostringstream runs, med;
    runs << "n,seed,lambda,error_n,error_probe,td_iters\n";
    for (const auto& r : res.rows)
      runs << r.n << ',' << r.seed << ',' << format_double(r.lambda) << ',' << format_double(r.error_n) << ','
           << format_double(r.error_probe) << ',' << r.td_iters << '\n';
    med << "n,median_error_n,median_error_probe\n";
    for (std::size_t i = 0; i < res.n.size(); ++i)
      med << res.n[i] << ',' << format_double(res.median_error_n[i]) << ','
          << format_double(res.median_error_probe[i]) << '\n';
    write_text_file(out_path(cfg, "eval_rate_runs.csv"), runs.str());
    write_text_file(out_path(cfg, "eval_rate.csv"), med.str());
    json j{{"slope", res.fit.slope},
           {"intercept", res.fit.intercept},
           {"r_squared", res.fit.r_squared},
           {"slope_probe", res.fit_probe.slope},
           {"r_squared_probe", res.fit_probe.r_squared}};
    write_text_file(out_path(cfg, "rate_fit.json"), j.dump(2) + "\n");
  }
  return res;
}

TrainSummary summarize(const TrainingLog& log) {
  TrainSummary s;
  s.seed = log.seed;
  s.initial_gap = log.initial_gap;
  s.final_gap = log.records.empty() ? log.initial_gap : log.records.back().gap;
  s.min_gap = log.has_oracle ? log.min_gap_all() : kNaN;
  s.bound_literal_holds = s.bound_corrected_holds = log.has_oracle;
  for (const NpgRecord& r : log.records) {
    if (!(r.min_gap <= r.bound_literal + 1e-9)) s.bound_literal_holds = false;
    if (!(r.min_gap <= r.bound_corrected + 1e-9)) s.bound_corrected_holds = false;
  }
  std::vector<double> first, last;
  const std::size_t m = log.records.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (i < 10) first.push_back(log.records[i].reward_mean);
    if (i + 10 >= m) last.push_back(log.records[i].reward_mean);
  }
  s.first10_reward = mean(first);
  s.last10_reward = mean(last);
  return s;
}

namespace {

json summary_json(const TrainingLog& log, const TrainSummary& s) {
  return json{{"seed", log.seed},
              {"initial_gap", num_or_null(s.initial_gap)},
              {"final_gap", num_or_null(s.final_gap)},
              {"min_gap", num_or_null(s.min_gap)},
              {"bound_literal_holds", s.bound_literal_holds},
              {"bound_corrected_holds", s.bound_corrected_holds},
              {"first10_reward", num_or_null(s.first10_reward)},
              {"last10_reward", num_or_null(s.last10_reward)},
              {"final_reward_mean", num_or_null(log.final_reward_mean)},
              {"final_reward_std", num_or_null(log.final_reward_std)},
              {"iterations", log.records.size()},
              {"aborted", log.aborted},
              {"abort_reason", log.abort_reason},
              {"warnings", log.warnings}};
}

std::vector<TrainingLog> train_all(const ExperimentConfig& cfg, const NpgConfig& npg) {
  std::unique_ptr<PolicyOracle> oracle;
  auto mdp = environment_with_oracle(cfg, oracle, false);
  auto kernel = make_kernel(cfg, *mdp);
  std::vector<TrainingLog> logs(cfg.seeds.size());
  parallel_tasks(cfg.threads, logs.size(),
                 [&](std::size_t i) { logs[i] = run_npg(*mdp, kernel, npg, cfg.seeds[i], oracle.get()).log; });
  return logs;
}

std::string training_csv(const TrainingLog& log) {
  std::ostringstream os;
  write_training_csv(os, log);
  return os.str();
}

}  // namespace

TrainResult run_train(const ExperimentConfig& cfg) {
  validate(cfg);
  prepare_output(cfg);
  TrainResult res;
  res.logs = train_all(cfg, cfg.npg);
  json runs = json::array();
  for (const TrainingLog& log : res.logs) {
    res.summaries.push_back(summarize(log));
    runs.push_back(summary_json(log, res.summaries.back()));
  }
  if (!cfg.output_dir.empty()) {
    for (const TrainingLog& log : res.logs)
      write_text_file(out_path(cfg, "train_seed" + std::to_string(log.seed) + ".csv"), training_csv(log));
    write_text_file(out_path(cfg, "summary.json"), json{{"runs", runs}}.dump(2) + "\n");
  }
  return res;
}

SweepVerdict sweep_verdict(const std::vector<ExponentStats>& stats) {
  SweepVerdict v;
  auto find = [&](double a) -> const ExponentStats* {
    for (const auto& s : stats)
      if (std::abs(s.exponent - a) < 1e-12) return &s;
    return nullptr;
  };
  const ExponentStats *e02 = find(0.2), *e05 = find(0.5), *e15 = find(1.5);
  if (!e02 || !e05 || !e15) {
    v.text = "no verdict: needs exponents 0.2, 0.5 and 1.5";
    return v;
  }
  v.available = true;
  v.half_beats_three_halves = e05->mean_final_gap < e15->mean_final_gap;
  v.fifth_unstable = (e02->non_monotone && e02->var_final_gap >= 3.0 * e05->var_final_gap) ||
                     e02->mean_final_gap > e05->mean_final_gap;
  v.half_best = std::all_of(stats.begin(), stats.end(),
                            [&](const ExponentStats& s) { return &s == e05 || e05->mean_final_gap <= s.mean_final_gap; });
  if (v.half_beats_three_halves && v.fifth_unstable)
    v.text = "0.5 best";
  else if (!v.half_beats_three_halves)
    v.text = "ordering violated: a=1.5 reached a smaller final gap than a=0.5";
  else
    v.text = "ordering violated: a=0.2 neither unstable nor worse than a=0.5";
  return v;
}

SweepResult run_schedule_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  prepare_output(cfg);
  SweepResult res;
  std::ostringstream runs;
  runs << "exponent,seed,k,gap,reward_mean\n";
  for (double a : cfg.exponents) {
    NpgConfig npg = cfg.npg;
    npg.schedule.step_exponent = a;
    std::vector<TrainingLog> logs = train_all(cfg, npg);

    ExponentStats st;
    st.exponent = a;
    std::vector<double> finals;
    std::size_t K = 0;
    for (const TrainingLog& log : logs) {
      K = std::max(K, log.records.size());
      finals.push_back(log.records.empty() ? log.initial_gap : log.records.back().gap);
      double prev = log.initial_gap;
      for (const NpgRecord& r : log.records) {
        if (r.gap > prev + 1e-3 * log.initial_gap) st.non_monotone = true;
        prev = r.gap;
        runs << format_double(a) << ',' << log.seed << ',' << r.k << ',' << format_double(r.gap) << ','
             << format_double(r.reward_mean) << '\n';
      }
    }
    st.mean_final_gap = mean(finals);
    st.var_final_gap = variance(finals);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> g, r;
      for (const TrainingLog& log : logs)
        if (k < log.records.size()) g.push_back(log.records[k].gap), r.push_back(log.records[k].reward_mean);
      st.mean_gap.push_back(mean(g));
      st.mean_reward.push_back(mean(r));
    }
    st.smoothed_gap = moving_average(st.mean_gap, kSmoothingWindow);
    st.smoothed_reward = moving_average(st.mean_reward, kSmoothingWindow);
    res.stats.push_back(std::move(st));
    res.logs.push_back(std::move(logs));
  }
  res.verdict = sweep_verdict(res.stats);

  if (!cfg.output_dir.empty()) {
    std::ostringstream sm;
    sm << "exponent,k,mean_gap,smoothed_gap,mean_reward,smoothed_reward\n";
    json per = json::array();
    for (const ExponentStats& st : res.stats) {
      for (std::size_t k = 0; k < st.mean_gap.size(); ++k)
        sm << format_double(st.exponent) << ',' << k + 1 << ',' << format_double(st.mean_gap[k]) << ','
           << format_double(st.smoothed_gap[k]) << ',' << format_double(st.mean_reward[k]) << ','
           << format_double(st.smoothed_reward[k]) << '\n';
      per.push_back(json{{"exponent", st.exponent},
                         {"mean_final_gap", num_or_null(st.mean_final_gap)},
                         {"var_final_gap", num_or_null(st.var_final_gap)},
                         {"non_monotone", st.non_monotone}});
    }
    write_text_file(out_path(cfg, "sweep_runs.csv"), runs.str());
    write_text_file(out_path(cfg, "sweep.csv"), sm.str());
    json verdict{{"available", res.verdict.available},
                 {"half_beats_three_halves", res.verdict.half_beats_three_halves},
                 {"fifth_unstable", res.verdict.fifth_unstable},
                 {"half_best", res.verdict.half_best},
                 {"text", res.verdict.text}};
    write_text_file(out_path(cfg, "summary.json"),
                    json{{"exponents", per}, {"verdict", verdict}, {"smoothing_window", kSmoothingWindow}}.dump(2) +
                        "\n");
  }
  return res;
}

double geometric_ratio(const ConvergenceTrace& trace, double floor) {
  std::vector<std::pair<double, double>> pts;
  for (const TraceRow& r : trace.rows)
    if (std::isfinite(r.error) && r.error > floor) pts.emplace_back(r.iter, std::log(r.error));
  if (pts.size() < 4) return kNaN;
  pts.erase(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(pts.size() / 2));
  return std::exp(ols_fit(std::move(pts)).slope);
}

DiagnosticsResult run_diagnostics(const ExperimentConfig& cfg) {
  validate(cfg);
  std::unique_ptr<PolicyOracle> oracle;
  auto mdp = environment_with_oracle(cfg, oracle, true);
  auto kernel = make_kernel(cfg, *mdp);
  prepare_output(cfg);
  const double gamma = mdp->discount();
  const SoftmaxPolicy pi(mdp->num_actions(), mdp->feature_dim());
  const QFunction Q = oracle->q_function(pi);

  DiagnosticsResult res;
  res.n = cfg.diagnostics.n;
  res.lambda = pick_lambda(cfg, res.n);
  const SampleBatch batch =
      sample_batch(*mdp, pi, res.n, CounterRng(cfg.seeds.front()).split(res.n)(), cfg.npg.sampling, "uniform");

  const ClosedFormResult cf = krr_td_closed_form(batch, kernel, res.lambda, gamma);
  res.closed_form_residual = cf.relative_residual;
  res.condition_estimate = cf.condition_estimate;
  res.td_error_n = empirical_distance(batch, as_function(cf.q), Q);

  TdSolverConfig tc = cfg.npg.td;
  tc.lambda = res.lambda;
  tc.record_trace = true;
  const IterateResult it = kernel_td_iterate(batch, kernel, gamma, tc, nullptr, &cf.q->coeffs());
  res.trace = it.trace;
  res.final_error = empirical_distance(batch, as_function(it.q), as_function(cf.q));
  res.observed_ratio = geometric_ratio(res.trace, 1e-11);

  res.bellman_mean = bellman_residuals(batch, Q, gamma).mean();
  if (kernel->is_tabular()) {
    const auto* tab = dynamic_cast<const TabularMdp*>(mdp.get());
    const DecompositionResult d =
        error_decomposition_residual(batch, *cf.q, *exact_q_as_estimate(exact_q(*tab, pi), kernel), res.lambda, gamma);
    res.decomposition_relative = d.relative_proof;
  } else {
    res.decomposition_skipped = true;
    res.decomposition_relative = kNaN;
  }

  if (!cfg.output_dir.empty()) {
    std::ostringstream tr;
    write_trace_csv(tr, res.trace);
    write_text_file(out_path(cfg, "trace.csv"), tr.str());
    json j{{"n", res.n},
           {"lambda", res.lambda},
           {"closed_form_residual", res.closed_form_residual},
           {"condition_estimate", num_or_null(res.condition_estimate)},
           {"eta", res.trace.eta},
           {"alpha", res.trace.alpha},
           {"spectral_radius", res.trace.spectral_radius},
           {"observed_ratio", num_or_null(res.observed_ratio)},
           {"iterations", res.trace.iterations},
           {"converged", res.trace.converged},
           {"final_error", res.final_error},
           {"td_error_n", res.td_error_n},
           {"bellman_residual_mean", res.bellman_mean},
           {"decomposition_relative", num_or_null(res.decomposition_relative)},
           {"decomposition_skipped", res.decomposition_skipped}};
    write_text_file(out_path(cfg, "diagnostics.json"), j.dump(2) + "\n");
  }
  return res;
}

}  // namespace knpg::harness

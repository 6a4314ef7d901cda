// knpg: command line front end for the experiment harness.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knpg/error.hpp"
#include "knpg/harness/config.hpp"
#include "knpg/harness/experiments.hpp"
#include "knpg/harness/svg_plot.hpp"

using namespace knpg;
using namespace knpg::harness;

namespace {

struct CommonFlags {
  std::string config;
  std::string seeds;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seeds, "seed, comma list or range a-b; overrides the config");
  sub->add_option("--out", f.out, "output directory; overrides the config");
  sub->add_option("--threads", f.threads, "worker threads; overrides the config")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const CommonFlags& f, ExperimentKind expected) {
  ExperimentConfig cfg = load_config(f.config);
  if (cfg.kind != expected)
    throw ConfigError("config declares experiment '" + to_string(cfg.kind) + "' but the subcommand is '" +
                      to_string(expected) + "'");
  if (!f.seeds.empty()) cfg.seeds = parse_seed_list(f.seeds);
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.threads > 0) cfg.threads = f.threads;
  validate(cfg);
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"kernel TD / natural policy gradient experiments"};
  app.require_subcommand(1);

  CommonFlags rate_f, train_f, sweep_f, diag_f;
  auto* rate = app.add_subcommand("eval-rate", "TD error vs sample size and log-log rate fit");
  add_common(rate, rate_f);
  auto* train = app.add_subcommand("train", "run NPG for every seed");
  add_common(train, train_f);
  auto* sweep = app.add_subcommand("schedule-sweep", "NPG over several step-size exponents");
  add_common(sweep, sweep_f);
  auto* diag = app.add_subcommand("diagnostics", "TD convergence trace, spectral radius and identity checks");
  add_common(diag, diag_f);

  std::vector<std::string> plot_inputs;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plot", "render SVG plots from harness CSVs");
  plot->add_option("csv", plot_inputs, "CSV files")->required();
  plot->add_option("--out", plot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (rate->parsed()) {
    const auto cfg = resolve(rate_f, ExperimentKind::EvalRate);
    const auto res = run_eval_rate(cfg);
    std::printf("slope %.4f  intercept %.4f  r^2 %.4f  (probe slope %.4f)\n", res.fit.slope, res.fit.intercept,
                res.fit.r_squared, res.fit_probe.slope);
  } else if (train->parsed()) {
    const auto cfg = resolve(train_f, ExperimentKind::Train);
    const auto res = run_train(cfg);
    for (std::size_t i = 0; i < res.logs.size(); ++i) {
      const auto& s = res.summaries[i];
      const auto& log = res.logs[i];
      if (log.has_oracle)
        std::printf("seed %llu: gap %.4g -> %.4g (min %.4g)%s\n", static_cast<unsigned long long>(s.seed),
                    s.initial_gap, s.final_gap, s.min_gap, log.aborted ? "  ABORTED" : "");
      else
        std::printf("seed %llu: reward first10 %.4g last10 %.4g%s\n", static_cast<unsigned long long>(s.seed),
                    s.first10_reward, s.last10_reward, log.aborted ? "  ABORTED" : "");
      for (const auto& w : log.warnings) std::fprintf(stderr, "  warning: %s\n", w.c_str());
      if (log.aborted) std::fprintf(stderr, "  abort: %s\n", log.abort_reason.c_str());
    }
  } else if (sweep->parsed()) {
    const auto cfg = resolve(sweep_f, ExperimentKind::ScheduleSweep);
    const auto res = run_schedule_sweep(cfg);
    for (const auto& st : res.stats)
      std::printf("a=%g: mean final gap %.4g  var %.3g%s\n", st.exponent, st.mean_final_gap, st.var_final_gap,
                  st.non_monotone ? "  non-monotone" : "");
    std::printf("verdict: %s\n", res.verdict.text.c_str());
  } else if (diag->parsed()) {
    const auto cfg = resolve(diag_f, ExperimentKind::Diagnostics);
    const auto r = run_diagnostics(cfg);
    std::printf("n %zu  lambda %.4g  closed-form residual %.3g\n", r.n, r.lambda, r.closed_form_residual);
    std::printf("eta %.4g  alpha %.4g  spectral radius %.6f  observed ratio %.6f  iterations %d%s\n", r.trace.eta,
                r.trace.alpha, r.trace.spectral_radius, r.observed_ratio, r.trace.iterations,
                r.trace.converged ? "" : " (not converged)");
    std::printf("||f_T - closed form||_n %.3g  ||f - Q||_n %.4g  decomposition residual %s\n", r.final_error,
                r.td_error_n, r.decomposition_skipped ? "skipped" : std::to_string(r.decomposition_relative).c_str());
  } else if (plot->parsed()) {
    for (const auto& f : emit_plots(plot_inputs, plot_out)) std::printf("%s\n", f.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error (line %zu): %s\n", e.line(), e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

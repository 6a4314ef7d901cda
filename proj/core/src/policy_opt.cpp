#include "knpg/policy_opt.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "knpg/error.hpp"

namespace knpg {

Regime parse_regime(const std::string& name) {
  if (name == "tabular") return Regime::Tabular;
  if (name == "sobolev") return Regime::Sobolev;
  if (name == "ntk") return Regime::NTK;
  if (name == "gaussian") return Regime::Gaussian;
  throw ConfigError("unknown schedule regime: " + name);
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Tabular: return "tabular";
    case Regime::Sobolev: return "sobolev";
    case Regime::NTK: return "ntk";
    case Regime::Gaussian: return "gaussian";
  }
  return "unknown";
}

NormProxyMode parse_norm_proxy_mode(const std::string& name) {
  if (name == "coefficient_norm") return NormProxyMode::CoefficientNorm;
  if (name == "constant") return NormProxyMode::Constant;
  throw ConfigError("unknown norm proxy mode: " + name);
}

void validate(const ScheduleConfig& c) {
  if (!(c.step_exponent >= 0.0)) throw ConfigError("schedule: step_exponent must be nonnegative");
  if (!(c.one_minus_cgamma > 0.0 && c.one_minus_cgamma <= 1.0))
    throw ConfigError("schedule: one_minus_cgamma must lie in (0, 1]");
  if (!(c.n_base > 0.0) || !(c.lambda_base > 0.0)) throw ConfigError("schedule: n_base and lambda_base must be positive");
  if (c.n_min < 1 || c.n_max < c.n_min) throw ConfigError("schedule: need 1 <= n_min <= n_max");
  if (!(c.proxy_floor > 0.0)) throw ConfigError("schedule: proxy_floor must be positive");
  if (c.regime == Regime::Tabular && !(c.tabular_nu > 0.0 && c.tabular_nu < 1.0))
    throw ConfigError("schedule: tabular nu must lie in (0, 1)");
  if (c.regime == Regime::Sobolev && !(2.0 * c.sobolev_m > c.dim_d && c.dim_d > 0.0))
    throw ConfigError("schedule: sobolev needs 2m > d > 0");
  if (c.regime == Regime::NTK && !(c.dim_d > 0.0)) throw ConfigError("schedule: ntk needs d > 0");
  if (c.regime == Regime::Gaussian && !(c.gaussian_eps > 0.0 && c.gaussian_eps < 1.0))
    throw ConfigError("schedule: gaussian eps must lie in (0, 1)");
}

ScheduleStep schedule(const ScheduleConfig& c, int k, double norm_proxy) {
  validate(c);
  if (k < 1) throw ConfigError("schedule: k must be at least 1");
  const double p = std::max(norm_proxy, c.proxy_floor);
  const double kk = static_cast<double>(k);
  const double cg = c.one_minus_cgamma;
  const double log_term = std::log(std::max(std::numbers::e, p * kk / cg));
  ScheduleStep st;
  st.delta = std::pow(kk, -c.step_exponent);
  switch (c.regime) {
    case Regime::Tabular:
      st.n_raw = c.n_base * (p * p * kk / (cg * cg) * log_term + std::pow(std::sqrt(kk) * p, 4.0 / (1.0 + c.tabular_nu)));
      st.lambda = c.lambda_base * cg / (p * std::sqrt(kk));
      break;
    case Regime::Sobolev: {
      const double m = c.sobolev_m, d = c.dim_d;
      const double e = (2.0 * m + d) / (2.0 * m - d);
      st.n_raw = c.n_base * std::pow(p, 2.0 * e) * std::pow(kk, e) / std::pow(cg, (2.0 * m + d / 2.0) / m);
      st.lambda = c.lambda_base * cg / (std::pow(p, 2.0 * m / (2.0 * m - d)) * std::pow(kk, m / (2.0 * m - d)));
      break;
    }
    case Regime::NTK: {
      const double d = c.dim_d;
      st.n_raw = c.n_base * std::pow(p, 2.0 * d) * std::pow(kk, d) / std::pow(cg, (3.0 * d + 1.0) / (d + 1.0));
      st.lambda = c.lambda_base * cg / (std::pow(p, (d + 1.0) / 2.0) * std::pow(kk, (d + 1.0) / 4.0));
      break;
    }
    case Regime::Gaussian: {
      const double q = 1.0 / (1.0 - c.gaussian_eps);
      st.n_raw = c.n_base * std::pow(p, 2.0 * q) * std::pow(kk, q) / (cg * cg) * log_term;
      st.lambda = c.lambda_base * cg / (std::pow(p, q) * std::pow(std::sqrt(kk), q));
      break;
    }
  }
  const double clamped = std::clamp(std::ceil(st.n_raw), static_cast<double>(c.n_min), static_cast<double>(c.n_max));
  st.n = static_cast<std::size_t>(clamped);
  return st;
}

std::pair<double, double> regime_exponents(const ScheduleConfig& c) {
  switch (c.regime) {
    case Regime::Tabular: return {0.0, 0.5};
    case Regime::Sobolev: return {c.dim_d / (2.0 * c.sobolev_m), 0.0};
    // Laplace kernel = Matern 1/2, i.e. Sobolev order (d + 1) / 2.
    case Regime::NTK: return {c.dim_d / (c.dim_d + 1.0), 0.0};
    case Regime::Gaussian: return {0.0, (c.dim_d + 1.0) / 2.0};
  }
  return {0.0, 0.0};
}

double rate_lambda(const ScheduleConfig& c, std::size_t n) {
  if (n < 2) throw ConfigError("rate_lambda: n must be at least 2");
  const auto [beta, kappa] = regime_exponents(c);
  const double nd = static_cast<double>(n);
  return c.lambda_base * std::pow(c.one_minus_cgamma, beta / (2.0 + 2.0 * beta)) *
         std::pow(nd, -1.0 / (2.0 + 2.0 * beta)) * std::pow(std::abs(std::log(nd)), kappa / (1.0 + beta));
}

SoftmaxPolicy npg_step(const SoftmaxPolicy& policy, std::shared_ptr<const QEstimate> f, double delta) {
  return policy.with_term(delta, std::move(f));
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

namespace {

double proximal_objective(const Eigen::VectorXd& p, const Eigen::VectorXd& pi_old, const Eigen::VectorXd& f,
                          double delta) {
  double v = delta * p.dot(f);
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p[a] <= 0.0) continue;
    if (pi_old[a] <= 0.0) return -std::numeric_limits<double>::infinity();
    v -= p[a] * std::log(p[a] / pi_old[a]);
  }
  return v;
}

}  // namespace

Eigen::VectorXd kl_proximal_maximizer(const Eigen::VectorXd& pi_old, const Eigen::VectorXd& f, double delta) {
  const Eigen::Index A = pi_old.size();
  if (A < 1 || f.size() != A) throw ConfigError("kl_proximal_maximizer: size mismatch");
  if (A == 1) return Eigen::VectorXd::Ones(1);

  if (A == 2) {
    auto J = [&](double p) { return proximal_objective(Eigen::Vector2d(p, 1.0 - p), pi_old, f, delta); };
    double best = 0.0, bestv = J(0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double p = i * 1e-3, v = J(p);
      if (v > bestv) bestv = v, best = p;
    }
    const double lo = std::max(0.0, best - 1e-3), hi = std::min(1.0, best + 1e-3);
    for (int i = 0; i <= 2000; ++i) {
      const double p = std::min(hi, lo + i * 1e-6), v = J(p);
      if (v > bestv) bestv = v, best = p;
    }
    return Eigen::Vector2d(best, 1.0 - best);
  }

  if (A == 3) {
    auto J = [&](double p0, double p1) {
      return proximal_objective(Eigen::Vector3d(p0, p1, std::max(0.0, 1.0 - p0 - p1)), pi_old, f, delta);
    };
    double b0 = 0.0, b1 = 0.0, bestv = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; i + j <= 1000; ++j) {
        const double v = J(i * 1e-3, j * 1e-3);
        if (v > bestv) bestv = v, b0 = i * 1e-3, b1 = j * 1e-3;
      }
    const double c0 = b0, c1 = b1;
    for (int i = -100; i <= 100; ++i)
      for (int j = -100; j <= 100; ++j) {
        const double p0 = c0 + i * 1e-5, p1 = c1 + j * 1e-5;
        if (p0 < 0.0 || p1 < 0.0 || p0 + p1 > 1.0) continue;
        const double v = J(p0, p1);
        if (v > bestv) bestv = v, b0 = p0, b1 = p1;
      }
    return Eigen::Vector3d(b0, b1, std::max(0.0, 1.0 - b0 - b1));
  }

  // Exponentiated-gradient ascent with step 0.5, started from uniform.
  const double beta = 0.5;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(A, 1.0 / static_cast<double>(A));
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd grad = delta * f;
    for (Eigen::Index a = 0; a < A; ++a) grad[a] -= std::log(p[a] / pi_old[a]) + 1.0;
    Eigen::VectorXd logp = p.array().log().matrix() + beta * grad;
    logp.array() -= logp.maxCoeff();
    Eigen::VectorXd next = logp.array().exp();
    next /= next.sum();
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change < 1e-6 * 1e-3) break;
  }
  return p;
}

double kl_proximal_check(const SoftmaxPolicy& policy_old, const QEstimate& f, double delta,
                         const std::vector<Eigen::VectorXd>& states) {
  const int A = policy_old.num_actions();
  double worst = 0.0;
  for (const Eigen::VectorXd& s : states) {
    const Eigen::VectorXd pi_old = policy_old.action_distribution(s);
    Eigen::VectorXd fv(A);
    for (int a = 0; a < A; ++a) fv[a] = f(StateAction{s, a, {}});
    Eigen::VectorXd update = (pi_old.array().log() + delta * fv.array()).matrix();
    update = softmax(update);
    worst = std::max(worst, total_variation(kl_proximal_maximizer(pi_old, fv, delta), update));
  }
  return worst;
}

double TrainingLog::min_gap_all() const {
  double m = initial_gap;
  for (const NpgRecord& r : records) m = std::min({m, r.gap_prev, r.gap});
  return m;
}

void write_training_csv(std::ostream& os, const TrainingLog& log) {
  os << "k,n,lambda,delta,eta,alpha,td_iters,td_residual,bellman_rms,f_norm,norm_proxy,td_error_n,e_inf,"
        "f_range,gap_prev,gap,min_gap,bound_literal,bound_corrected,reward_mean,reward_std,min_action_prob\n";
  for (const NpgRecord& r : log.records) {
    os << r.k << ',' << r.n << ',' << format_double(r.lambda) << ',' << format_double(r.delta) << ','
       << format_double(r.eta) << ',' << format_double(r.alpha) << ',' << r.td_iters << ','
       << format_double(r.td_residual) << ',' << format_double(r.bellman_rms) << ',' << format_double(r.f_norm)
       << ',' << format_double(r.norm_proxy) << ',' << format_double(r.td_error_n) << ','
       << format_double(r.e_inf) << ',' << format_double(r.f_range) << ',' << format_double(r.gap_prev) << ','
       << format_double(r.gap) << ',' << format_double(r.min_gap) << ',' << format_double(r.bound_literal) << ','
       << format_double(r.bound_corrected) << ',' << format_double(r.reward_mean) << ','
       << format_double(r.reward_std) << ',' << format_double(r.min_action_prob) << '\n';
  }
}

namespace {

std::uint64_t derive_seed(const CounterRng& master, std::uint64_t a, std::uint64_t b) {
  CounterRng r = master.split(a).split(b);
  return r();
}

// States (deduplicated, in order) of a probe set laid out in blocks of A actions.
std::vector<Eigen::VectorXd> probe_states(const PointSet& probes, int A) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i + A <= probes.size(); i += A)
    out.emplace_back(Eigen::Map<const Eigen::VectorXd>(probes.state_ptr(i), probes.state_dim()));
  return out;
}

}  // namespace

NpgResult run_npg(const MdpModel& mdp, std::shared_ptr<const Kernel> kernel, const NpgConfig& cfg,
                  std::uint64_t seed, const PolicyOracle* oracle) {
  validate(cfg.schedule);
  if (!kernel) throw ConfigError("run_npg: null kernel");
  if (kernel->state_dim() != mdp.feature_dim() || kernel->action_dim() != 0)
    throw ConfigError("run_npg: kernel layout does not match the environment");
  if (cfg.outer_iters < 0) throw ConfigError("run_npg: outer_iters must be nonnegative");

  const int A = mdp.num_actions();
  const double gamma = mdp.discount();
  const double r_max = mdp.reward_bound();
  const CounterRng master(seed);
  NpgResult res{TrainingLog{}, SoftmaxPolicy(A, mdp.feature_dim())};
  TrainingLog& log = res.log;
  SoftmaxPolicy& pi = res.policy;
  log.seed = seed;
  log.has_oracle = oracle != nullptr;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<Eigen::VectorXd> probe_s;
  if (oracle) {
    log.initial_gap = oracle->gap(pi);
    log.initial_kl = oracle->initial_kl(pi);
    probe_s = probe_states(oracle->probe_points(), A);
  } else {
    log.initial_gap = nan;
    log.initial_kl = nan;
    log.warnings.push_back("no oracle: gaps, TD errors and the initial-KL bound term are not available");
  }

  double sum_delta = 0.0, sum_lit = 0.0, sum_cor = 0.0;
  double min_gap = log.initial_gap;
  double prev_gap = log.initial_gap;
  bool warned_prob = false;
  int capped = 0;
  std::shared_ptr<const QEstimate> prev_f;

  for (int k = 1; k <= cfg.outer_iters; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    NpgRecord rec;
    rec.k = k;
    rec.norm_proxy = pi.norm_proxy(cfg.schedule.norm_proxy_mode);
    const ScheduleStep st = schedule(cfg.schedule, k, rec.norm_proxy);
    rec.n = st.n;
    rec.lambda = st.lambda;
    rec.delta = st.delta;

    if (cfg.eval_episodes > 0) {
      const EpisodeStats es = run_episodes(mdp, pi, cfg.eval_episodes, derive_seed(master, k, 7));
      rec.reward_mean = es.mean();
      rec.reward_std = es.stddev();
    } else {
      rec.reward_mean = rec.reward_std = nan;
    }

    SampleBatch batch;
    bool sampled = false;
    for (int attempt = 0; attempt < 2 && !sampled; ++attempt) {
      try {
        batch = sample_batch(mdp, pi, st.n, derive_seed(master, k, attempt), cfg.sampling,
                             "pi" + std::to_string(k - 1));
        sampled = true;
      } catch (const SamplingError& e) {
        log.warnings.push_back("k=" + std::to_string(k) + ": sampling failed (" + e.what() + " at " + e.state() +
                               ")" + (attempt == 0 ? ", retrying" : ", aborting"));
      }
    }
    if (!sampled) {
      log.aborted = true;
      log.abort_reason = "sampling failed twice at k=" + std::to_string(k);
      break;
    }

    std::shared_ptr<const QEstimate> f;
    try {
      if (cfg.td.mode == TdMode::ClosedForm) {
        const ClosedFormResult cf = krr_td_closed_form(batch, kernel, st.lambda, gamma);
        f = cf.q;
        rec.td_residual = cf.relative_residual;
        rec.eta = rec.alpha = nan;
      } else {
        TdSolverConfig tc = cfg.td;
        tc.lambda = st.lambda;
        tc.record_trace = false;
        const IterateResult it = kernel_td_iterate(batch, kernel, gamma, tc, cfg.warm_start ? prev_f : nullptr);
        f = it.q;
        rec.eta = it.trace.eta;
        rec.alpha = it.trace.alpha;
        rec.td_iters = it.trace.iterations;
        rec.td_residual = it.trace.last_change;
        if (!it.trace.converged) ++capped;
      }
    } catch (const DivergenceError& e) {
      log.aborted = true;
      log.abort_reason = "TD diverged at k=" + std::to_string(k) + " (spectral radius " +
                         format_double(e.spectral_radius()) + "): " + e.what();
      break;
    }
    const Eigen::VectorXd eps = bellman_residuals(batch, as_function(f), gamma);
    rec.bellman_rms = eps.norm() / std::sqrt(static_cast<double>(eps.size()));
    rec.f_norm = std::sqrt(f->rkhs_norm_sq());

    if (oracle) {
      const QFunction Q = oracle->q_function(pi);
      rec.td_error_n = empirical_distance(batch, as_function(f), Q);
      const PointSet& probes = oracle->probe_points();
      const Eigen::VectorXd fv = f->evaluate(probes);
      rec.e_inf = (fv - Q(probes)).cwiseAbs().maxCoeff();
      double range = 0.0;
      for (std::size_t i = 0; i + A <= probes.size(); i += A) {
        const auto seg = fv.segment(static_cast<Eigen::Index>(i), A);
        range = std::max(range, seg.maxCoeff() - seg.minCoeff());
      }
      rec.f_range = range;
    } else {
      rec.td_error_n = rec.e_inf = rec.f_range = nan;
    }

    SoftmaxPolicy next = npg_step(pi, f, st.delta);
    if (cfg.compaction_every > 0 && k % cfg.compaction_every == 0 && !kernel->is_tabular()) {
      PointSet dict(mdp.feature_dim());
      const std::size_t m = std::min(batch.size(), cfg.compaction_points / static_cast<std::size_t>(A));
      for (std::size_t i = 0; i < m; ++i)
        for (int a = 0; a < A; ++a) dict.push_back(batch.omega0.state_ptr(i), a);
      next = next.compacted(dict);
    }

    rec.gap_prev = prev_gap;
    if (oracle) {
      rec.gap = oracle->gap(next);
      min_gap = std::min(min_gap, prev_gap);
      sum_delta += st.delta;
      sum_lit += 2.0 * st.delta * rec.e_inf + st.delta * st.delta * r_max / (1.0 - gamma);
      sum_cor += 2.0 * st.delta * rec.e_inf + st.delta * st.delta * rec.f_range * rec.f_range / 8.0;
      rec.min_gap = min_gap;
      rec.bound_literal = (log.initial_kl + sum_lit) / sum_delta;
      rec.bound_corrected = (log.initial_kl + sum_cor) / ((1.0 - gamma) * sum_delta);
    } else {
      rec.gap = rec.min_gap = rec.bound_literal = rec.bound_corrected = nan;
    }
    prev_gap = rec.gap;

    double min_prob = 1.0;
    if (!probe_s.empty()) {
      for (const Eigen::VectorXd& s : probe_s) min_prob = std::min(min_prob, next.action_distribution(s).minCoeff());
    } else {
      const std::size_t m = std::min<std::size_t>(batch.size(), 256);
      for (std::size_t i = 0; i < m; ++i)
        min_prob = std::min(min_prob, next.action_distribution(batch.omega0.state_ptr(i)).minCoeff());
    }
    rec.min_action_prob = min_prob;
    if (min_prob < 1e-6 && !warned_prob) {
      warned_prob = true;
      log.warnings.push_back("k=" + std::to_string(k) +
                             ": minimum action probability below 1e-6; the KL-proximal premise 0 < pi < 1 is nearly violated");
    }

    pi = std::move(next);
    prev_f = f;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.records.push_back(rec);
  }

  if (capped > 0)
    log.warnings.push_back("TD hit max_iters before tol in " + std::to_string(capped) +
                           " outer iterations; td_residual holds the last coefficient change");

  if (cfg.final_eval_episodes > 0 && !log.aborted) {
    const EpisodeStats es = run_episodes(mdp, pi, cfg.final_eval_episodes, derive_seed(master, 0xfffffffULL, 7));
    log.final_reward_mean = es.mean();
    log.final_reward_std = es.stddev();
  }
  return res;
}

}  // namespace knpg

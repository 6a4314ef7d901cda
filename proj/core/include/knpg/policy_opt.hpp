#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "knpg/evaluation.hpp"
#include "knpg/mdp.hpp"
#include "knpg/oracle.hpp"
#include "knpg/policy.hpp"

namespace knpg {

enum class Regime { Tabular, Sobolev, NTK, Gaussian };
Regime parse_regime(const std::string& name);
std::string to_string(Regime r);
NormProxyMode parse_norm_proxy_mode(const std::string& name);

struct ScheduleConfig {
  Regime regime = Regime::Tabular;
  double step_exponent = 0.5;     // Delta_k = k^{-a}
  double one_minus_cgamma = 0.1;  // (1 - c gamma), not identifiable from data
  double sobolev_m = 2.0;
  double dim_d = 1.0;
  double tabular_nu = 0.5;
  double gaussian_eps = 0.1;
  double n_base = 1.0;
  double lambda_base = 1.0;
  std::size_t n_min = 100;
  std::size_t n_max = 100000;
  NormProxyMode norm_proxy_mode = NormProxyMode::CoefficientNorm;
  // Proxies below this value are raised to it before entering the table rules.
  double proxy_floor = 1.0;
};

void validate(const ScheduleConfig& cfg);

struct ScheduleStep {
  double delta = 0.0;
  std::size_t n = 0;
  double lambda = 0.0;
  double n_raw = 0.0;  // before clamping
};

// Regime rule for (delta, n, lambda) at step k, with ||pi^k||_H replaced by the proxy.
ScheduleStep schedule(const ScheduleConfig& cfg, int k, double norm_proxy);

// (beta, kappa) of the regime, used by rate_lambda.
std::pair<double, double> regime_exponents(const ScheduleConfig& cfg);

// lambda = lambda_base (1 - c gamma)^{beta / (2 + 2 beta)} n^{-1 / (2 + 2 beta)} |log n|^{kappa / (1 + beta)}
double rate_lambda(const ScheduleConfig& cfg, std::size_t n);

// pi^{k+1} proportional to pi^k exp(delta f): a new policy with (delta, f) appended.
SoftmaxPolicy npg_step(const SoftmaxPolicy& policy, std::shared_ptr<const QEstimate> f, double delta);

// argmax over the simplex of delta <f, p> - KL(p || pi_old), by grid search
// (A <= 3) or exponentiated-gradient ascent (A > 3).
Eigen::VectorXd kl_proximal_maximizer(const Eigen::VectorXd& pi_old, const Eigen::VectorXd& f, double delta);

// Largest total-variation distance between the maximizer and the exponentiated
// update over the probe states.
double kl_proximal_check(const SoftmaxPolicy& policy_old, const QEstimate& f, double delta,
                         const std::vector<Eigen::VectorXd>& states);

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct NpgConfig {
  ScheduleConfig schedule;
  TdSolverConfig td;  // lambda is replaced per outer iteration
  SamplingOptions sampling;
  int outer_iters = 200;
  // Episodes per iteration used to score the behavior policy (0 disables).
  int eval_episodes = 0;
  // Episodes used to score the final policy.
  int final_eval_episodes = 0;
  bool warm_start = false;
  int compaction_every = 0;  // 0 disables
  std::size_t compaction_points = 1024;
};

struct NpgRecord {
  int k = 0;
  std::size_t n = 0;
  double lambda = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  double alpha = 0.0;
  int td_iters = 0;
  double td_residual = 0.0;  // closed-form relative residual or last step change
  double bellman_rms = 0.0;  // RMS Bellman residual of f on its batch
  double f_norm = 0.0;       // ||f^(k)||_H
  double norm_proxy = 0.0;   // proxy of pi^(k-1) fed to the schedule
  double td_error_n = 0.0;   // ||f^(k) - Q^{pi^(k-1)}||_n, NaN without an oracle
  double e_inf = 0.0;        // max-norm TD error on the probe set
  double f_range = 0.0;      // max over probe states of max_a f - min_a f
  double gap_prev = 0.0;     // gap of pi^(k-1)
  double gap = 0.0;          // gap of pi^k
  double min_gap = 0.0;      // min over pi^0 .. pi^(k-1)
  double bound_literal = 0.0;
  double bound_corrected = 0.0;
  double reward_mean = 0.0;  // behavior policy pi^(k-1)
  double reward_std = 0.0;
  double min_action_prob = 0.0;  // of pi^k over the probe states
  double wall_seconds = 0.0;     // not written to CSV
};

struct TrainingLog {
  std::uint64_t seed = 0;
  bool has_oracle = false;
  double initial_gap = 0.0;
  double initial_kl = 0.0;
  double final_reward_mean = 0.0;
  double final_reward_std = 0.0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> warnings;
  std::vector<NpgRecord> records;

  double min_gap_all() const;  // includes the final policy
};

void write_training_csv(std::ostream& os, const TrainingLog& log);

struct NpgResult {
  TrainingLog log;
  SoftmaxPolicy policy;
};

// The NPG outer loop. The oracle, when given, supplies gaps and TD errors.
NpgResult run_npg(const MdpModel& mdp, std::shared_ptr<const Kernel> kernel, const NpgConfig& cfg,
                  std::uint64_t seed, const PolicyOracle* oracle = nullptr);

}  // namespace knpg

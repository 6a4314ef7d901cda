#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "knpg/mdp.hpp"
#include "knpg/q_estimate.hpp"

namespace knpg {

// Values of some Q function at every point of a set.
using QFunction = std::function<Eigen::VectorXd(const PointSet&)>;

QFunction as_function(std::shared_ptr<const QEstimate> q);

// Dense K, C and r of the regularized TD system. Rows of C belonging to terminal transitions are zero.
struct TdSystem {
  Eigen::MatrixXd K;
  Eigen::MatrixXd C;
  Eigen::VectorXd r;
};

TdSystem build_td_system(const SampleBatch& batch, const Kernel& kernel);

struct ClosedFormResult {
  std::shared_ptr<const QEstimate> q;
  double relative_residual = 0.0;  // ||(K + lambda n I - gamma C) b - r|| / ||r||
  double condition_estimate = 0.0;
  double jitter = 0.0;             // diagonal shift used by the fallback, 0 if unused
  bool tabular_path = false;
};

// b = [K + lambda n I - gamma C]^{-1} r by LU with one refinement step.
ClosedFormResult krr_td_closed_form(const SampleBatch& batch, std::shared_ptr<const Kernel> kernel,
                                    double lambda, double gamma);

enum class TdMode { ClosedForm, Iterative };
TdMode parse_td_mode(const std::string& name);

struct TdSolverConfig {
  double lambda = 0.0;
  // eta <= 0 selects auto-tuning, which also couples alpha = eta lambda n.
  double eta = 0.0;
  // Used only with an explicit eta. Negative means alpha = eta lambda n.
  double alpha = -1.0;
  // Exact iteration count. 0 runs until tol is met or max_iters is reached.
  int iters = 0;
  int max_iters = 20000;
  double tol = 1e-8;  // on ||b_{t+1} - b_t||_inf
  TdMode mode = TdMode::Iterative;
  bool record_trace = true;
};

struct StepSize {
  double eta = 0.0;
  double alpha = 0.0;
  double spectral_radius = 0.0;
  int halvings = 0;
  bool stable = false;
};

constexpr double kStepC1 = 0.5;

// eta = (1 - C1) / (n (1 + gamma) K_max + lambda), alpha = eta lambda n, then
// halve eta (keeping the coupling) until the power-iteration radius is below 1.
StepSize auto_step_size(const Eigen::MatrixXd& K, const Eigen::MatrixXd& C, double lambda, std::size_t n,
                        double gamma);

// (1 - alpha) I - eta K + eta gamma C
Eigen::MatrixXd iteration_matrix(const Eigen::MatrixXd& K, const Eigen::MatrixXd& C, double eta, double alpha,
                                 double gamma);

// Growth rate of ||G^t x|| for a random start; matvec computes G x.
double power_spectral_radius(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec,
                             Eigen::Index n, int iters = 400, std::uint64_t seed = 1);

// Iteration count T >= log(tol lambda / (n ||b0 - b*||^2)) / log(rho).
int td_iteration_count(double tol, double lambda, std::size_t n, double dist_b, double rho);

struct TraceRow {
  int iter = 0;
  double step_change = 0.0;  // ||f_t - f_{t+1}||_n
  double coeff_norm = 0.0;   // ||b_{t+1}||_2
  double error = 0.0;        // ||f_{t+1} - reference||_n, NaN without a reference
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  int iterations = 0;
  bool converged = false;
  double eta = 0.0;
  double alpha = 0.0;
  double spectral_radius = 0.0;
  double last_change = 0.0;  // ||b_T - b_{T-1}||_inf
};

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace);

struct IterateResult {
  std::shared_ptr<const QEstimate> q;
  ConvergenceTrace trace;
};

// b_{t+1} = (1 - alpha) b_t - eta (f_t(w0) - r - gamma f_t(w1)).
// A nonzero init contributes (1 - alpha)^t f_0 to f_t. reference, if given, holds
// coefficients on the batch anchors used to fill TraceRow::error.
IterateResult kernel_td_iterate(const SampleBatch& batch, std::shared_ptr<const Kernel> kernel, double gamma,
                                const TdSolverConfig& cfg, std::shared_ptr<const QEstimate> init = nullptr,
                                const Eigen::VectorXd* reference = nullptr);

// eps_i = r_i + gamma q(w1_i) - q(w0_i); the successor term is dropped for terminal rows.
Eigen::VectorXd bellman_residuals(const SampleBatch& batch, const QFunction& q, double gamma);

// Root mean square of (a - b) over the batch anchors.
double empirical_distance(const SampleBatch& batch, const QFunction& a, const QFunction& b);

struct DecompositionResult {
  bool skipped = false;
  std::string note;
  // Statement form: (1/n) sum (D0^2 - gamma D0 D1) = (1/n) sum eps D0 - lambda <D, Qhat>.
  double lhs_statement = 0.0;
  double rhs_statement = 0.0;
  // Proof form: the above plus lambda ||D||^2 on the left, -lambda <D, Q> on the right.
  double lhs_proof = 0.0;
  double rhs_proof = 0.0;
  double residual_statement = 0.0;
  double residual_proof = 0.0;
  // residual_proof / (1 + |lhs_proof|)
  double relative_proof = 0.0;
};

// Both functions must share a kernel so <., .>_H is finite coefficient algebra.
DecompositionResult error_decomposition_residual(const SampleBatch& batch, const QEstimate& q_hat,
                                                 const QEstimate& q_exact, double lambda, double gamma);
// Non-representable truth: reported as skipped.
DecompositionResult error_decomposition_residual(const SampleBatch& batch, const QEstimate& q_hat,
                                                 const QFunction& q_exact, double lambda, double gamma);

}  // namespace knpg

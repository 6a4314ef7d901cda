#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <vector>

#include "knpg/environments.hpp"
#include "knpg/evaluation.hpp"
#include "knpg/policy.hpp"

namespace knpg {

// S x A table of action probabilities; rows sum to 1.
using PolicyTable = Eigen::MatrixXd;

struct ExactQ {
  Eigen::MatrixXd table;  // S x A
  double gamma = 0.0;
};

PolicyTable uniform_policy(int S, int A);
PolicyTable policy_table(const TabularMdp& mdp, const SoftmaxPolicy& policy);

// S x S state chain under the policy.
Eigen::MatrixXd state_transition(const TabularMdp& mdp, const PolicyTable& pi);

// Solves (I - gamma P^pi) Q = r over S*A unknowns.
ExactQ exact_q(const TabularMdp& mdp, const PolicyTable& pi);
ExactQ exact_q(const TabularMdp& mdp, const SoftmaxPolicy& policy);

// max |r + gamma P Pi Q - Q|
double bellman_residual_max(const TabularMdp& mdp, const PolicyTable& pi, const ExactQ& q);

// Fixed point of the policy Bellman operator by iteration (test oracle).
ExactQ evaluate_by_iteration(const TabularMdp& mdp, const PolicyTable& pi, double tol = 1e-13);

struct StationaryResult {
  Eigen::VectorXd nu;
  bool converged = true;  // false: Cesaro average was used
  int iterations = 0;
};

// Left principal eigenvector of a row-stochastic matrix by power iteration.
StationaryResult stationary_distribution(const Eigen::MatrixXd& P, int max_iters = 100000, double tol = 1e-15);

struct OptimalSolution {
  PolicyTable policy;
  std::vector<int> greedy;
  ExactQ q;
  Eigen::VectorXd nu;     // stationary distribution under the optimal policy
  Eigen::MatrixXd sigma;  // sigma(s, a) = pi*(a|s) nu(s)
  bool ergodic = true;
  int value_iterations = 0;
};

// Value iteration to a 1e-12 span, greedy with lowest-index ties, then
// policy-iteration polish.
OptimalSolution optimal_policy(const TabularMdp& mdp);

// R[pi] = sum_s nu(s) sum_a pi(a|s) Q^pi(s, a)
double expected_total_reward(const TabularMdp& mdp, const PolicyTable& pi, const Eigen::VectorXd& nu);

struct PerformanceDifference {
  double lhs = 0.0;             // R[pi] - R[pi*]
  double rhs_literal = 0.0;     // E_nu* <Q^pi, pi - pi*>
  double rhs_discounted = 0.0;  // rhs_literal / (1 - gamma)
};

PerformanceDifference performance_difference(const TabularMdp& mdp, const PolicyTable& pi,
                                             const OptimalSolution& opt);

// E_{nu*} KL(pi* || pi)
double expected_kl(const OptimalSolution& opt, const PolicyTable& pi);

// Q as a delta-kernel expansion over every state-action pair.
std::shared_ptr<const QEstimate> exact_q_as_estimate(const ExactQ& q, std::shared_ptr<const Kernel> kernel);

void write_q_csv(std::ostream& os, const ExactQ& q);

// Ground truth for an environment, used for gap and TD-error bookkeeping.
class PolicyOracle {
 public:
  virtual ~PolicyOracle() = default;
  // Q^pi evaluated at feature-space points.
  virtual QFunction q_function(const SoftmaxPolicy& pi) const = 0;
  virtual double gap(const SoftmaxPolicy& pi) const = 0;
  virtual double initial_kl(const SoftmaxPolicy& pi) const = 0;
  // Points where the max-norm TD error is measured.
  virtual const PointSet& probe_points() const = 0;
};

class TabularOracle : public PolicyOracle {
 public:
  explicit TabularOracle(const TabularMdp& mdp);

  QFunction q_function(const SoftmaxPolicy& pi) const override;
  double gap(const SoftmaxPolicy& pi) const override;
  double initial_kl(const SoftmaxPolicy& pi) const override;
  const PointSet& probe_points() const override { return probes_; }
  const OptimalSolution& optimum() const { return opt_; }
  double optimal_reward() const { return r_star_; }

 private:
  const TabularMdp& mdp_;
  OptimalSolution opt_;
  double r_star_;
  PointSet probes_;
};

// Nystrom discretization of the smooth circle on G grid points.
class SmoothCircleOracle : public PolicyOracle {
 public:
  SmoothCircleOracle(const SmoothCircleMdp& mdp, int grid = 512, int probes = 512);

  QFunction q_function(const SoftmaxPolicy& pi) const override;
  double gap(const SoftmaxPolicy& pi) const override;
  double initial_kl(const SoftmaxPolicy& pi) const override;
  const PointSet& probe_points() const override { return probes_; }

 private:
  PolicyTable grid_policy(const SoftmaxPolicy& pi) const;

  const SmoothCircleMdp& mdp_;
  int G_;
  TabularMdp grid_;
  OptimalSolution opt_;
  double r_star_;
  PointSet probes_;
};

}  // namespace knpg

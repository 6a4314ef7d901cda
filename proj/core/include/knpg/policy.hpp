#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "knpg/q_estimate.hpp"
#include "knpg/rng.hpp"

namespace knpg {

enum class NormProxyMode { CoefficientNorm, Constant };

struct FlatExpansion;

// pi(a|s) proportional to exp F(s, a), F = sum_j Delta_j f_j.
// Immutable: with_term returns a new policy and shares the existing terms.
class SoftmaxPolicy {
 public:
  struct Term {
    double delta;
    std::shared_ptr<const QEstimate> f;
  };

  // action_dim > 0 declares a continuous action space; such policies hold terms
  // but cannot produce distributions.
  SoftmaxPolicy(int num_actions, int state_dim, int action_dim = 0);

  int num_actions() const { return num_actions_; }
  int state_dim() const { return state_dim_; }
  const std::vector<Term>& terms() const { return *terms_; }
  std::size_t expansion_size() const;

  SoftmaxPolicy with_term(double delta, std::shared_ptr<const QEstimate> f) const;

  // F(s, .) over all discrete actions.
  Eigen::VectorXd logits(const double* s) const;
  Eigen::VectorXd logits(const Eigen::VectorXd& s) const { return logits(s.data()); }
  Eigen::VectorXd action_distribution(const double* s) const;
  Eigen::VectorXd action_distribution(const Eigen::VectorXd& s) const { return action_distribution(s.data()); }
  int sample_action(const double* s, CounterRng& rng) const;

  double norm_proxy(NormProxyMode mode) const;

  // Re-fits F onto the dictionary by kernel interpolation with a diagonal jitter.
  // The term list is kept for norm bookkeeping.
  SoftmaxPolicy compacted(const PointSet& dictionary, double jitter = 1e-8) const;

 private:
  void check_state_dim(const Eigen::VectorXd& s) const;

  int num_actions_;
  int state_dim_;
  int action_dim_;
  std::shared_ptr<const std::vector<Term>> terms_;
  std::shared_ptr<const FlatExpansion> flat_;
};

// Softmax of logits with max-subtraction.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace knpg

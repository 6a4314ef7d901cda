#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace knpg {

// A point omega = (s, a). Discrete actions use `action`; continuous actions use
// `action_vec` and set action to -1.
struct StateAction {
  Eigen::VectorXd state;
  int action = -1;
  Eigen::VectorXd action_vec;
};

// Column-major storage of many StateAction points with a shared layout.
class PointSet {
 public:
  PointSet() = default;
  PointSet(int state_dim, int action_dim = 0) : state_dim_(state_dim), action_dim_(action_dim) {}

  int state_dim() const { return state_dim_; }
  // 0 means discrete actions.
  int action_dim() const { return action_dim_; }
  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }

  void reserve(std::size_t n);
  void push_back(const StateAction& p);
  void push_back(const double* state, int action);

  StateAction point(std::size_t i) const;
  const double* state_ptr(std::size_t i) const { return states_.data() + i * state_dim_; }
  const double* action_ptr(std::size_t i) const { return action_vecs_.data() + i * action_dim_; }
  int action(std::size_t i) const { return actions_[i]; }
  const std::vector<int>& actions() const { return actions_; }

  Eigen::Map<const Eigen::MatrixXd> states() const {
    return {states_.data(), state_dim_, static_cast<Eigen::Index>(size())};
  }

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::vector<double> states_;
  std::vector<int> actions_;
  std::vector<double> action_vecs_;
};

enum class KernelFamily { TabularDelta, GaussianRBF, LaplaceNTK, SobolevMatern };
enum class ActionCoupling { DeltaOnAction, JointKernel };

struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianRBF;
  double length_scale = 1.0;
  double smoothness = 0.0;  // Sobolev order m, SobolevMatern only
  ActionCoupling coupling = ActionCoupling::DeltaOnAction;

  bool operator==(const KernelSpec&) const = default;
};

KernelFamily parse_kernel_family(const std::string& name);
ActionCoupling parse_action_coupling(const std::string& name);
std::string to_string(KernelFamily f);
std::string to_string(ActionCoupling c);

// Validated kernel bound to a point layout. Immutable and thread-safe.
class Kernel {
 public:
  // action_dim 0 means discrete actions.
  Kernel(KernelSpec spec, int state_dim, int action_dim = 0);

  const KernelSpec& spec() const { return spec_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  bool is_tabular() const { return spec_.family == KernelFamily::TabularDelta; }
  // Upper bound on K(w, w). All supported families are normalized to 1.
  double k_max() const { return k_max_; }
  // Matern order nu = m - d/2, with d the dimension the radial profile sees.
  double matern_nu() const { return nu_; }

  double operator()(const StateAction& a, const StateAction& b) const;
  double eval(const PointSet& ps, std::size_t i, const PointSet& qs, std::size_t j) const;
  // Radial profile as a function of the squared distance.
  double radial(double sqdist) const;

  Eigen::MatrixXd gram(const PointSet& pts) const;
  Eigen::MatrixXd gram(const PointSet& rows, const PointSet& cols) const;

  void check_compatible(const PointSet& ps) const;

  // Unchecked evaluation on raw coordinates. av pointers may be null for discrete actions.
  double eval_raw(const double* s1, int a1, const double* av1, const double* s2, int a2,
                  const double* av2) const;

 private:
  void check_point(const StateAction& p) const;

  KernelSpec spec_;
  int state_dim_;
  int action_dim_;
  double k_max_ = 1.0;
  double nu_ = 0.0;
  double matern_scale_ = 0.0;  // 2^{1-nu} / Gamma(nu)
};

}  // namespace knpg

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "knpg/mdp.hpp"

namespace knpg {

// Finite MDP. The state is a 1-vector holding the index.
class TabularMdp : public MdpModel {
 public:
  // P is indexed [(s * A + a) * S + s'].
  TabularMdp(int S, int A, std::vector<double> P, Eigen::MatrixXd r, double gamma, Eigen::VectorXd mu0);

  std::string name() const override { return "tabular"; }
  int state_dim() const override { return 1; }
  int num_actions() const override { return A_; }
  double discount() const override { return gamma_; }
  double reward_bound() const override { return r_max_; }
  Eigen::VectorXd sample_initial(CounterRng& rng) const override;
  // Uniform over states.
  Eigen::VectorXd sample_explore(CounterRng& rng) const override;
  StepResult step(const Eigen::VectorXd& s, int a, CounterRng& rng) const override;

  int num_states() const { return S_; }
  double prob(int s, int a, int s1) const { return P_[(static_cast<std::size_t>(s) * A_ + a) * S_ + s1]; }
  const double* row(int s, int a) const { return P_.data() + (static_cast<std::size_t>(s) * A_ + a) * S_; }
  double reward(int s, int a) const { return r_(s, a); }
  const Eigen::MatrixXd& rewards() const { return r_; }
  const Eigen::VectorXd& initial_distribution() const { return mu0_; }
  TabularMdp with_discount(double gamma) const;

 private:
  int index_of(const Eigen::VectorXd& s) const;

  int S_, A_;
  std::vector<double> P_;
  Eigen::MatrixXd r_;
  double gamma_;
  Eigen::VectorXd mu0_;
  double r_max_;
};

// Dirichlet(1) transition rows, optionally sparsified, rewards U[0,1], uniform mu0.
TabularMdp make_random_tabular(int S, int A, double gamma, double sparsity, std::uint64_t seed);

// Four actions (up, down, left, right). With probability slip the move is uniform.
// Any action in the goal cell (bottom-right) pays 1 and returns to the start cell.
TabularMdp make_gridworld(int width, int height, double gamma, double slip);

// Axis-aligned box in raw state units for restart-explore draws.
struct ExploreBox {
  Eigen::VectorXd low, high;
};

struct CartPoleParams {
  double gravity = 9.8;
  double masscart = 1.0;
  double masspole = 0.1;
  double length = 0.5;  // half the pole length
  double force_mag = 10.0;
  double tau = 0.02;
  double theta_threshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  double x_threshold = 2.4;
  int max_steps = 500;
  double gamma = 0.99;
};

// State (x, x_dot, theta, theta_dot). Action 0 pushes left, 1 pushes right.
class CartPole : public MdpModel {
 public:
  explicit CartPole(CartPoleParams p = {}, ExploreBox box = default_box());
  static ExploreBox default_box();

  std::string name() const override { return "cartpole"; }
  int state_dim() const override { return 4; }
  int num_actions() const override { return 2; }
  double discount() const override { return p_.gamma; }
  double reward_bound() const override { return 1.0; }
  int max_episode_steps() const override { return p_.max_steps; }
  Eigen::VectorXd sample_initial(CounterRng& rng) const override;
  Eigen::VectorXd sample_explore(CounterRng& rng) const override;
  StepResult step(const Eigen::VectorXd& s, int a, CounterRng& rng) const override;
  Eigen::VectorXd observe(const Eigen::VectorXd& raw) const override;
  const CartPoleParams& params() const { return p_; }

 private:
  CartPoleParams p_;
  ExploreBox box_;
};

struct AcrobotParams {
  double dt = 0.2;
  double link_length_1 = 1.0;
  double link_mass_1 = 1.0;
  double link_mass_2 = 1.0;
  double link_com_pos_1 = 0.5;
  double link_com_pos_2 = 0.5;
  double link_moi = 1.0;
  double gravity = 9.8;
  int max_steps = 500;
  double gamma = 0.99;
};

// Raw state (theta1, theta2, dtheta1, dtheta2); features are
// (cos t1, sin t1, cos t2, sin t2, dt1 / 4pi, dt2 / 9pi). Torque = action - 1.
class Acrobot : public MdpModel {
 public:
  explicit Acrobot(AcrobotParams p = {}, ExploreBox box = default_box());
  static ExploreBox default_box();

  std::string name() const override { return "acrobot"; }
  int state_dim() const override { return 4; }
  int feature_dim() const override { return 6; }
  int num_actions() const override { return 3; }
  double discount() const override { return p_.gamma; }
  double reward_bound() const override { return 1.0; }
  int max_episode_steps() const override { return p_.max_steps; }
  Eigen::VectorXd sample_initial(CounterRng& rng) const override;
  Eigen::VectorXd sample_explore(CounterRng& rng) const override;
  StepResult step(const Eigen::VectorXd& s, int a, CounterRng& rng) const override;
  Eigen::VectorXd observe(const Eigen::VectorXd& raw) const override;
  const AcrobotParams& params() const { return p_; }

  // Time derivative of (theta1, theta2, dtheta1, dtheta2) under the given torque.
  Eigen::Vector4d derivatives(const Eigen::Vector4d& s, double torque) const;

 private:
  AcrobotParams p_;
  ExploreBox box_;
};

// Continuous circle theta in [0, 1) with two actions drifting left or right plus
// Gaussian noise. Rewards are smooth bumps. Features are (cos 2pi t, sin 2pi t).
struct SmoothCircleParams {
  double drift = 0.1;
  double noise = 0.1;
  double gamma = 0.9;
};

class SmoothCircleMdp : public MdpModel {
 public:
  explicit SmoothCircleMdp(SmoothCircleParams p = {});

  std::string name() const override { return "smooth_circle"; }
  int state_dim() const override { return 1; }
  int feature_dim() const override { return 2; }
  int num_actions() const override { return 2; }
  double discount() const override { return p_.gamma; }
  double reward_bound() const override { return 1.0; }
  Eigen::VectorXd sample_initial(CounterRng& rng) const override;
  StepResult step(const Eigen::VectorXd& s, int a, CounterRng& rng) const override;
  Eigen::VectorXd observe(const Eigen::VectorXd& raw) const override;

  double reward_at(double theta, int a) const;
  // Wrapped-normal transition density from theta to theta1.
  double density(double theta, int a, double theta1) const;
  // Inverse of observe.
  double theta_of(const double* features) const;
  // Grid discretization on G equispaced points (Nystrom quadrature of the kernel).
  TabularMdp discretize(int G) const;
  const SmoothCircleParams& params() const { return p_; }

 private:
  SmoothCircleParams p_;
};

}  // namespace knpg

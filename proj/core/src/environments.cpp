#include "knpg/environments.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "knpg/error.hpp"

namespace knpg {

namespace {

Eigen::VectorXd uniform_in(const ExploreBox& box, CounterRng& rng) {
  Eigen::VectorXd s(box.low.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = box.low[i] + (box.high[i] - box.low[i]) * rng.uniform();
  return s;
}

void check_box(const ExploreBox& box, int dim) {
  if (box.low.size() != dim || box.high.size() != dim || (box.high.array() < box.low.array()).any())
    throw ConfigError("explore box does not match the state dimension");
}

int draw_index(const double* p, int n, CounterRng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (int i = 0; i < n; ++i) {
    c += p[i];
    if (u < c) return i;
  }
  // Roundoff can leave the cumulative sum just under 1; return the last supported index.
  for (int i = n - 1; i >= 0; --i)
    if (p[i] > 0.0) return i;
  return n - 1;
}

double wrap_pi(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(x + std::numbers::pi, two_pi);
  if (y < 0.0) y += two_pi;
  return y - std::numbers::pi;
}

double wrap_unit(double x) {
  double y = x - std::floor(x);
  return y >= 1.0 ? 0.0 : y;
}

}  // namespace

TabularMdp::TabularMdp(int S, int A, std::vector<double> P, Eigen::MatrixXd r, double gamma, Eigen::VectorXd mu0)
    : S_(S), A_(A), P_(std::move(P)), r_(std::move(r)), gamma_(gamma), mu0_(std::move(mu0)) {
  if (S < 1 || A < 1) throw ConfigError("tabular MDP: S and A must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("tabular MDP: discount must lie in [0, 1)");
  if (P_.size() != static_cast<std::size_t>(S) * A * S) throw ConfigError("tabular MDP: P has the wrong size");
  if (r_.rows() != S || r_.cols() != A) throw ConfigError("tabular MDP: r has the wrong shape");
  if (mu0_.size() != S) throw ConfigError("tabular MDP: mu0 has the wrong size");
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double sum = 0.0;
      for (int k = 0; k < S; ++k) {
        const double p = prob(s, a, k);
        if (!(p >= 0.0)) throw ConfigError("tabular MDP: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("tabular MDP: transition row does not sum to 1");
    }
  if ((mu0_.array() < 0.0).any() || std::abs(mu0_.sum() - 1.0) > 1e-12)
    throw ConfigError("tabular MDP: mu0 is not a distribution");
  if (!r_.allFinite()) throw ConfigError("tabular MDP: non-finite reward");
  r_max_ = std::max(r_.cwiseAbs().maxCoeff(), 1e-300);
}

int TabularMdp::index_of(const Eigen::VectorXd& s) const {
  if (s.size() != 1) throw ConfigError("tabular MDP: state must be a 1-vector");
  const int i = static_cast<int>(s[0]);
  if (i < 0 || i >= S_ || static_cast<double>(i) != s[0]) throw ConfigError("tabular MDP: state index out of range");
  return i;
}

Eigen::VectorXd TabularMdp::sample_initial(CounterRng& rng) const {
  return Eigen::VectorXd::Constant(1, draw_index(mu0_.data(), S_, rng));
}

Eigen::VectorXd TabularMdp::sample_explore(CounterRng& rng) const {
  const int s = std::min(S_ - 1, static_cast<int>(rng.uniform() * S_));
  return Eigen::VectorXd::Constant(1, s);
}

StepResult TabularMdp::step(const Eigen::VectorXd& s, int a, CounterRng& rng) const {
  const int i = index_of(s);
  if (a < 0 || a >= A_) throw ConfigError("tabular MDP: action out of range");
  StepResult out;
  out.next_state = Eigen::VectorXd::Constant(1, draw_index(row(i, a), S_, rng));
  out.reward = r_(i, a);
  return out;
}

TabularMdp TabularMdp::with_discount(double gamma) const { return TabularMdp(S_, A_, P_, r_, gamma, mu0_); }

TabularMdp make_random_tabular(int S, int A, double gamma, double sparsity, std::uint64_t seed) {
  if (S < 1 || A < 1) throw ConfigError("make_random_tabular: S and A must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("make_random_tabular: sparsity must lie in [0, 1)");
  CounterRng rng(seed);
  std::vector<double> P(static_cast<std::size_t>(S) * A * S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double* row = P.data() + (static_cast<std::size_t>(s) * A + a) * S;
      // Dirichlet(1) as normalized Exp(1) draws.
      int argmax = 0;
      for (int k = 0; k < S; ++k) {
        row[k] = -std::log1p(-rng.uniform());
        if (row[k] > row[argmax]) argmax = k;
      }
      for (int k = 0; k < S; ++k)
        if (k != argmax && rng.uniform() < sparsity) row[k] = 0.0;
      double sum = 0.0;
      for (int k = 0; k < S; ++k) sum += row[k];
      for (int k = 0; k < S; ++k) row[k] /= sum;
    }
  Eigen::MatrixXd r(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) r(s, a) = rng.uniform();
  return TabularMdp(S, A, std::move(P), std::move(r), gamma, Eigen::VectorXd::Constant(S, 1.0 / S));
}

TabularMdp make_gridworld(int width, int height, double gamma, double slip) {
  if (width < 1 || height < 1) throw ConfigError("gridworld: dimensions must be positive");
  if (!(slip >= 0.0 && slip <= 1.0)) throw ConfigError("gridworld: slip must lie in [0, 1]");
  const int S = width * height, A = 4;
  const int goal = S - 1;
  const int dx[4] = {0, 0, -1, 1};
  const int dy[4] = {-1, 1, 0, 0};
  std::vector<double> P(static_cast<std::size_t>(S) * A * S, 0.0);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(S, A);
  auto move = [&](int s, int dir) {
    const int x = s % width, y = s / width;
    const int nx = std::clamp(x + dx[dir], 0, width - 1);
    const int ny = std::clamp(y + dy[dir], 0, height - 1);
    return ny * width + nx;
  };
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double* row = P.data() + (static_cast<std::size_t>(s) * A + a) * S;
      if (s == goal && S > 1) {
        row[0] = 1.0;
        r(s, a) = 1.0;
        continue;
      }
      if (S == 1) r(s, a) = 1.0;
      row[move(s, a)] += 1.0 - slip;
      for (int d = 0; d < 4; ++d) row[move(s, d)] += slip / 4.0;
    }
  return TabularMdp(S, A, std::move(P), std::move(r), gamma, Eigen::VectorXd::Constant(S, 1.0 / S));
}

// CartPole

CartPole::CartPole(CartPoleParams p, ExploreBox box) : p_(p), box_(std::move(box)) {
  if (!(p_.gamma >= 0.0 && p_.gamma < 1.0)) throw ConfigError("cartpole: discount must lie in [0, 1)");
  if (p_.max_steps < 1) throw ConfigError("cartpole: max_steps must be positive");
  check_box(box_, 4);
}

ExploreBox CartPole::default_box() {
  ExploreBox b;
  b.high = Eigen::Vector4d(2.0, 2.0, 0.18, 2.0);
  b.low = -b.high;
  return b;
}

Eigen::VectorXd CartPole::sample_initial(CounterRng& rng) const {
  Eigen::VectorXd s(4);
  for (int i = 0; i < 4; ++i) s[i] = -0.05 + 0.1 * rng.uniform();
  return s;
}

Eigen::VectorXd CartPole::sample_explore(CounterRng& rng) const { return uniform_in(box_, rng); }

StepResult CartPole::step(const Eigen::VectorXd& s, int a, CounterRng&) const {
  if (s.size() != 4) throw ConfigError("cartpole: state must have 4 components");
  if (a != 0 && a != 1) throw ConfigError("cartpole: action must be 0 or 1");
  double x = s[0], x_dot = s[1], theta = s[2], theta_dot = s[3];
  const double force = a == 1 ? p_.force_mag : -p_.force_mag;
  const double total_mass = p_.masscart + p_.masspole;
  const double polemass_length = p_.masspole * p_.length;
  const double c = std::cos(theta), sn = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sn) / total_mass;
  const double thetaacc =
      (p_.gravity * sn - c * temp) / (p_.length * (4.0 / 3.0 - p_.masspole * c * c / total_mass));
  const double xacc = temp - polemass_length * thetaacc * c / total_mass;
  // Semi-implicit Euler: velocities first.
  x_dot += p_.tau * xacc;
  x += p_.tau * x_dot;
  theta_dot += p_.tau * thetaacc;
  theta += p_.tau * theta_dot;
  StepResult out;
  out.next_state = Eigen::Vector4d(x, x_dot, theta, theta_dot);
  if (!out.next_state.allFinite()) {
    std::string st = "(" + format_double(s[0]) + ", " + format_double(s[1]) + ", " + format_double(s[2]) +
                     ", " + format_double(s[3]) + ")";
    throw SamplingError("cartpole: non-finite state after step", st);
  }
  out.done = x < -p_.x_threshold || x > p_.x_threshold || theta < -p_.theta_threshold ||
             theta > p_.theta_threshold;
  out.reward = 1.0;
  return out;
}

Eigen::VectorXd CartPole::observe(const Eigen::VectorXd& raw) const {
  return Eigen::Vector4d(raw[0] / 2.4, raw[1] / 3.0, raw[2] / 0.21, raw[3] / 3.0);
}

// Acrobot

Acrobot::Acrobot(AcrobotParams p, ExploreBox box) : p_(p), box_(std::move(box)) {
  if (!(p_.gamma >= 0.0 && p_.gamma < 1.0)) throw ConfigError("acrobot: discount must lie in [0, 1)");
  if (p_.max_steps < 1) throw ConfigError("acrobot: max_steps must be positive");
  check_box(box_, 4);
}

ExploreBox Acrobot::default_box() {
  ExploreBox b;
  b.high = Eigen::Vector4d(std::numbers::pi, std::numbers::pi, 2.0, 4.0);
  b.low = -b.high;
  return b;
}

Eigen::VectorXd Acrobot::sample_initial(CounterRng& rng) const {
  Eigen::VectorXd s(4);
  for (int i = 0; i < 4; ++i) s[i] = -0.1 + 0.2 * rng.uniform();
  return s;
}

Eigen::VectorXd Acrobot::sample_explore(CounterRng& rng) const { return uniform_in(box_, rng); }

Eigen::Vector4d Acrobot::derivatives(const Eigen::Vector4d& s, double a) const {
  const double m1 = p_.link_mass_1, m2 = p_.link_mass_2;
  const double l1 = p_.link_length_1;
  const double lc1 = p_.link_com_pos_1, lc2 = p_.link_com_pos_2;
  const double I1 = p_.link_moi, I2 = p_.link_moi;
  const double g = p_.gravity;
  const double theta1 = s[0], theta2 = s[1], dtheta1 = s[2], dtheta2 = s[3];
  const double pi = std::numbers::pi;
  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(theta2)) + I1 + I2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(theta2)) + I2;
  const double phi2 = m2 * lc2 * g * std::cos(theta1 + theta2 - pi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * std::sin(theta2) -
                      2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(theta1 - pi / 2.0) + phi2;
  const double ddtheta2 = (a + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
                          (m2 * lc2 * lc2 + I2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

StepResult Acrobot::step(const Eigen::VectorXd& s, int a, CounterRng&) const {
  if (s.size() != 4) throw ConfigError("acrobot: state must have 4 components");
  if (a < 0 || a > 2) throw ConfigError("acrobot: action must be 0, 1 or 2");
  const double torque = static_cast<double>(a - 1);
  const double h = p_.dt;
  const Eigen::Vector4d y0 = s;
  // One classical RK4 step over dt.
  const Eigen::Vector4d k1 = derivatives(y0, torque);
  const Eigen::Vector4d k2 = derivatives(y0 + 0.5 * h * k1, torque);
  const Eigen::Vector4d k3 = derivatives(y0 + 0.5 * h * k2, torque);
  const Eigen::Vector4d k4 = derivatives(y0 + h * k3, torque);
  Eigen::Vector4d y = y0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!y.allFinite()) {
    std::string st = "(" + format_double(s[0]) + ", " + format_double(s[1]) + ", " + format_double(s[2]) +
                     ", " + format_double(s[3]) + ")";
    throw SamplingError("acrobot: non-finite state after step", st);
  }
  const double pi = std::numbers::pi;
  y[0] = wrap_pi(y[0]);
  y[1] = wrap_pi(y[1]);
  y[2] = std::clamp(y[2], -4.0 * pi, 4.0 * pi);
  y[3] = std::clamp(y[3], -9.0 * pi, 9.0 * pi);
  StepResult out;
  out.next_state = y;
  out.done = -std::cos(y[0]) - std::cos(y[1] + y[0]) > 1.0;
  out.reward = out.done ? 0.0 : -1.0;
  return out;
}

Eigen::VectorXd Acrobot::observe(const Eigen::VectorXd& raw) const {
  const double pi = std::numbers::pi;
  Eigen::VectorXd f(6);
  f << std::cos(raw[0]), std::sin(raw[0]), std::cos(raw[1]), std::sin(raw[1]), raw[2] / (4.0 * pi),
      raw[3] / (9.0 * pi);
  return f;
}

// Smooth circle

SmoothCircleMdp::SmoothCircleMdp(SmoothCircleParams p) : p_(p) {
  if (!(p_.gamma >= 0.0 && p_.gamma < 1.0)) throw ConfigError("smooth circle: discount must lie in [0, 1)");
  if (!(p_.noise > 0.0)) throw ConfigError("smooth circle: noise must be positive");
}

double SmoothCircleMdp::reward_at(double theta, int a) const {
  const double center = a == 0 ? 0.25 : 0.75;
  return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * (theta - center)));
}

double SmoothCircleMdp::density(double theta, int a, double theta1) const {
  const double mean = theta + (a == 0 ? -p_.drift : p_.drift);
  const double sig = p_.noise;
  double acc = 0.0;
  for (int w = -6; w <= 6; ++w) {
    const double z = (theta1 + w - mean) / sig;
    acc += std::exp(-0.5 * z * z);
  }
  return acc / (sig * std::sqrt(2.0 * std::numbers::pi));
}

Eigen::VectorXd SmoothCircleMdp::sample_initial(CounterRng& rng) const {
  return Eigen::VectorXd::Constant(1, rng.uniform());
}

StepResult SmoothCircleMdp::step(const Eigen::VectorXd& s, int a, CounterRng& rng) const {
  if (s.size() != 1) throw ConfigError("smooth circle: state must be a 1-vector");
  if (a != 0 && a != 1) throw ConfigError("smooth circle: action must be 0 or 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double drift = a == 0 ? -p_.drift : p_.drift;
  StepResult out;
  out.reward = reward_at(s[0], a);
  out.next_state = Eigen::VectorXd::Constant(1, wrap_unit(s[0] + drift + p_.noise * normal(rng)));
  return out;
}

Eigen::VectorXd SmoothCircleMdp::observe(const Eigen::VectorXd& raw) const {
  const double t = 2.0 * std::numbers::pi * raw[0];
  return Eigen::Vector2d(std::cos(t), std::sin(t));
}

double SmoothCircleMdp::theta_of(const double* f) const {
  return wrap_unit(std::atan2(f[1], f[0]) / (2.0 * std::numbers::pi));
}

TabularMdp SmoothCircleMdp::discretize(int G) const {
  if (G < 2) throw ConfigError("smooth circle: grid needs at least two points");
  std::vector<double> P(static_cast<std::size_t>(G) * 2 * G);
  Eigen::MatrixXd r(G, 2);
  for (int j = 0; j < G; ++j)
    for (int a = 0; a < 2; ++a) {
      const double th = static_cast<double>(j) / G;
      double* row = P.data() + (static_cast<std::size_t>(j) * 2 + a) * G;
      double sum = 0.0;
      for (int k = 0; k < G; ++k) sum += row[k] = density(th, a, static_cast<double>(k) / G);
      for (int k = 0; k < G; ++k) row[k] /= sum;
      r(j, a) = reward_at(th, a);
    }
  return TabularMdp(G, 2, std::move(P), std::move(r), p_.gamma, Eigen::VectorXd::Constant(G, 1.0 / G));
}

}  // namespace knpg

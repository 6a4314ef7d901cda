#include "knpg/oracle.hpp"

#include <cmath>
#include <ostream>

#include "knpg/error.hpp"

namespace knpg {

PolicyTable uniform_policy(int S, int A) { return PolicyTable::Constant(S, A, 1.0 / A); }

PolicyTable policy_table(const TabularMdp& mdp, const SoftmaxPolicy& policy) {
  if (policy.num_actions() != mdp.num_actions() || policy.state_dim() != 1)
    throw ConfigError("policy_table: policy does not match the MDP");
  PolicyTable pi(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s) {
    const double x = s;
    pi.row(s) = policy.action_distribution(&x).transpose();
  }
  return pi;
}

namespace {

void check_policy(const TabularMdp& mdp, const PolicyTable& pi) {
  if (pi.rows() != mdp.num_states() || pi.cols() != mdp.num_actions())
    throw ConfigError("policy table has the wrong shape");
}

}  // namespace

Eigen::MatrixXd state_transition(const TabularMdp& mdp, const PolicyTable& pi) {
  check_policy(mdp, pi);
  const int S = mdp.num_states(), A = mdp.num_actions();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      const double* row = mdp.row(s, a);
      for (int k = 0; k < S; ++k) P(s, k) += w * row[k];
    }
  return P;
}

ExactQ exact_q(const TabularMdp& mdp, const PolicyTable& pi) {
  check_policy(mdp, pi);
  const int S = mdp.num_states(), A = mdp.num_actions();
  const int N = S * A;
  const double gamma = mdp.discount();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(N, N);
  Eigen::VectorXd r(N);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const int i = s * A + a;
      r[i] = mdp.reward(s, a);
      const double* row = mdp.row(s, a);
      for (int k = 0; k < S; ++k) {
        if (row[k] == 0.0) continue;
        for (int b = 0; b < A; ++b) M(i, k * A + b) -= gamma * row[k] * pi(k, b);
      }
    }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  Eigen::VectorXd q = lu.solve(r);
  q += lu.solve(r - M * q);
  ExactQ out;
  out.gamma = gamma;
  out.table = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(q.data(), S, A);
  const double res = bellman_residual_max(mdp, pi, out);
  if (!(res <= 1e-10 * std::max(1.0, out.table.cwiseAbs().maxCoeff())))
    throw NumericalError("exact_q: Bellman residual " + format_double(res) + " above 1e-10");
  return out;
}

ExactQ exact_q(const TabularMdp& mdp, const SoftmaxPolicy& policy) { return exact_q(mdp, policy_table(mdp, policy)); }

double bellman_residual_max(const TabularMdp& mdp, const PolicyTable& pi, const ExactQ& q) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  const Eigen::VectorXd V = (pi.array() * q.table.array()).rowwise().sum();
  double worst = 0.0;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double next = Eigen::Map<const Eigen::VectorXd>(mdp.row(s, a), S).dot(V);
      worst = std::max(worst, std::abs(mdp.reward(s, a) + mdp.discount() * next - q.table(s, a)));
    }
  return worst;
}

ExactQ evaluate_by_iteration(const TabularMdp& mdp, const PolicyTable& pi, double tol) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  ExactQ q;
  q.gamma = mdp.discount();
  q.table = Eigen::MatrixXd::Zero(S, A);
  for (int it = 0; it < 10000000; ++it) {
    const Eigen::VectorXd V = (pi.array() * q.table.array()).rowwise().sum();
    Eigen::MatrixXd next(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        next(s, a) = mdp.reward(s, a) + mdp.discount() * Eigen::Map<const Eigen::VectorXd>(mdp.row(s, a), S).dot(V);
    const double diff = (next - q.table).cwiseAbs().maxCoeff();
    q.table = next;
    if (diff < tol) break;
  }
  return q;
}

StationaryResult stationary_distribution(const Eigen::MatrixXd& P, int max_iters, double tol) {
  const Eigen::Index S = P.rows();
  StationaryResult out;
  Eigen::RowVectorXd nu = Eigen::RowVectorXd::Constant(S, 1.0 / static_cast<double>(S));
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::RowVectorXd next = nu * P;
    next /= next.sum();
    const double diff = (next - nu).cwiseAbs().sum();
    nu = next;
    out.iterations = it;
    if (diff < tol) {
      out.nu = nu.transpose();
      return out;
    }
  }
  // Periodic or slowly mixing chain: average the iterates.
  out.converged = false;
  Eigen::RowVectorXd avg = Eigen::RowVectorXd::Zero(S);
  const int window = std::max(1000, max_iters / 10);
  for (int it = 0; it < window; ++it) {
    avg += nu;
    nu = nu * P;
  }
  avg /= avg.sum();
  out.nu = avg.transpose();
  return out;
}

OptimalSolution optimal_policy(const TabularMdp& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  const double gamma = mdp.discount();
  auto q_from_v = [&](const Eigen::VectorXd& V) {
    Eigen::MatrixXd Q(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        Q(s, a) = mdp.reward(s, a) + gamma * Eigen::Map<const Eigen::VectorXd>(mdp.row(s, a), S).dot(V);
    return Q;
  };
  OptimalSolution out;
  Eigen::VectorXd V = Eigen::VectorXd::Zero(S);
  for (int it = 0; it < 10000000; ++it) {
    const Eigen::VectorXd Vn = q_from_v(V).rowwise().maxCoeff();
    const Eigen::VectorXd d = Vn - V;
    V = Vn;
    out.value_iterations = it + 1;
    if (d.maxCoeff() - d.minCoeff() < 1e-12) break;
  }
  auto greedy_of = [&](const Eigen::MatrixXd& Q) {
    std::vector<int> g(S);
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    for (int s = 0; s < S; ++s) {
      const double best = Q.row(s).maxCoeff();
      int a = 0;
      while (Q(s, a) < best - 1e-12 * scale) ++a;
      g[s] = a;
    }
    return g;
  };
  out.greedy = greedy_of(q_from_v(V));
  // Policy-iteration polish: stop when the greedy policy is stable.
  for (int round = 0; round < 1000; ++round) {
    out.policy = PolicyTable::Zero(S, A);
    for (int s = 0; s < S; ++s) out.policy(s, out.greedy[s]) = 1.0;
    out.q = exact_q(mdp, out.policy);
    std::vector<int> improved = greedy_of(out.q.table);
    bool stable = true;
    for (int s = 0; s < S; ++s)
      if (out.q.table(s, improved[s]) > out.q.table(s, out.greedy[s]) + 1e-12 * std::max(1.0, out.q.table.cwiseAbs().maxCoeff())) {
        stable = false;
        out.greedy[s] = improved[s];
      }
    if (stable) break;
  }
  const StationaryResult st = stationary_distribution(state_transition(mdp, out.policy));
  out.nu = st.nu;
  out.ergodic = st.converged;
  out.sigma = out.policy.array().colwise() * out.nu.array();
  return out;
}

double expected_total_reward(const TabularMdp& mdp, const PolicyTable& pi, const Eigen::VectorXd& nu) {
  const ExactQ q = exact_q(mdp, pi);
  const Eigen::VectorXd V = (pi.array() * q.table.array()).rowwise().sum();
  return nu.dot(V);
}

PerformanceDifference performance_difference(const TabularMdp& mdp, const PolicyTable& pi,
                                             const OptimalSolution& opt) {
  const ExactQ q = exact_q(mdp, pi);
  const Eigen::VectorXd V = (pi.array() * q.table.array()).rowwise().sum();
  const Eigen::VectorXd Vs = (opt.policy.array() * opt.q.table.array()).rowwise().sum();
  PerformanceDifference out;
  out.lhs = opt.nu.dot(V - Vs);
  const Eigen::VectorXd inner = (q.table.array() * (pi - opt.policy).array()).rowwise().sum();
  out.rhs_literal = opt.nu.dot(inner);
  out.rhs_discounted = out.rhs_literal / (1.0 - mdp.discount());
  return out;
}

double expected_kl(const OptimalSolution& opt, const PolicyTable& pi) {
  double kl = 0.0;
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    double ks = 0.0;
    for (Eigen::Index a = 0; a < pi.cols(); ++a) {
      const double p = opt.policy(s, a);
      if (p > 0.0) ks += p * std::log(p / pi(s, a));
    }
    kl += opt.nu[s] * ks;
  }
  return kl;
}

std::shared_ptr<const QEstimate> exact_q_as_estimate(const ExactQ& q, std::shared_ptr<const Kernel> kernel) {
  if (!kernel->is_tabular()) throw UnsupportedError("exact Q is representable only under the tabular kernel");
  auto anchors = std::make_shared<PointSet>(1);
  Eigen::VectorXd b(q.table.size());
  Eigen::Index i = 0;
  for (Eigen::Index s = 0; s < q.table.rows(); ++s)
    for (Eigen::Index a = 0; a < q.table.cols(); ++a) {
      const double x = static_cast<double>(s);
      anchors->push_back(&x, static_cast<int>(a));
      b[i++] = q.table(s, a);
    }
  return std::make_shared<const QEstimate>(std::move(kernel), std::move(anchors), std::move(b));
}

void write_q_csv(std::ostream& os, const ExactQ& q) {
  os << "state";
  for (Eigen::Index a = 0; a < q.table.cols(); ++a) os << ",q" << a;
  os << '\n';
  for (Eigen::Index s = 0; s < q.table.rows(); ++s) {
    os << s;
    for (Eigen::Index a = 0; a < q.table.cols(); ++a) os << ',' << format_double(q.table(s, a));
    os << '\n';
  }
}

// TabularOracle

TabularOracle::TabularOracle(const TabularMdp& mdp) : mdp_(mdp), opt_(optimal_policy(mdp)), probes_(1) {
  r_star_ = expected_total_reward(mdp_, opt_.policy, opt_.nu);
  for (int s = 0; s < mdp_.num_states(); ++s)
    for (int a = 0; a < mdp_.num_actions(); ++a) {
      const double x = s;
      probes_.push_back(&x, a);
    }
}

QFunction TabularOracle::q_function(const SoftmaxPolicy& pi) const {
  const Eigen::MatrixXd table = exact_q(mdp_, pi).table;
  return [table](const PointSet& ps) {
    Eigen::VectorXd v(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const int s = static_cast<int>(ps.state_ptr(i)[0]);
      v[static_cast<Eigen::Index>(i)] = table(s, ps.action(i));
    }
    return v;
  };
}

double TabularOracle::gap(const SoftmaxPolicy& pi) const {
  return r_star_ - expected_total_reward(mdp_, policy_table(mdp_, pi), opt_.nu);
}

double TabularOracle::initial_kl(const SoftmaxPolicy& pi) const { return expected_kl(opt_, policy_table(mdp_, pi)); }

// SmoothCircleOracle

SmoothCircleOracle::SmoothCircleOracle(const SmoothCircleMdp& mdp, int grid, int probes)
    : mdp_(mdp), G_(grid), grid_(mdp.discretize(grid)), opt_(optimal_policy(grid_)), probes_(2) {
  r_star_ = expected_total_reward(grid_, opt_.policy, opt_.nu);
  // Base-2 van der Corput points on the circle.
  for (int i = 0; i < probes; ++i) {
    double x = 0.0, f = 0.5;
    for (unsigned k = static_cast<unsigned>(i) + 1; k; k >>= 1, f *= 0.5)
      if (k & 1u) x += f;
    const Eigen::VectorXd feat = mdp_.observe(Eigen::VectorXd::Constant(1, x));
    for (int a = 0; a < 2; ++a) probes_.push_back(feat.data(), a);
  }
}

PolicyTable SmoothCircleOracle::grid_policy(const SoftmaxPolicy& pi) const {
  PolicyTable t(G_, 2);
  for (int j = 0; j < G_; ++j) {
    const Eigen::VectorXd feat = mdp_.observe(Eigen::VectorXd::Constant(1, static_cast<double>(j) / G_));
    t.row(j) = pi.action_distribution(feat).transpose();
  }
  return t;
}

QFunction SmoothCircleOracle::q_function(const SoftmaxPolicy& pi) const {
  const PolicyTable t = grid_policy(pi);
  const ExactQ q = exact_q(grid_, t);
  const Eigen::VectorXd V = (t.array() * q.table.array()).rowwise().sum();
  const SmoothCircleMdp* mdp = &mdp_;
  const int G = G_;
  return [mdp, G, V](const PointSet& ps) {
    Eigen::VectorXd out(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double th = mdp->theta_of(ps.state_ptr(i));
      const int a = ps.action(i);
      double num = 0.0, den = 0.0;
      for (int k = 0; k < G; ++k) {
        const double w = mdp->density(th, a, static_cast<double>(k) / G);
        num += w * V[k];
        den += w;
      }
      out[static_cast<Eigen::Index>(i)] = mdp->reward_at(th, a) + mdp->discount() * num / den;
    }
    return out;
  };
}

double SmoothCircleOracle::gap(const SoftmaxPolicy& pi) const {
  return r_star_ - expected_total_reward(grid_, grid_policy(pi), opt_.nu);
}

double SmoothCircleOracle::initial_kl(const SoftmaxPolicy& pi) const { return expected_kl(opt_, grid_policy(pi)); }

}  // namespace knpg

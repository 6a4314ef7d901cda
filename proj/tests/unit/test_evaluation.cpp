#include <gtest/gtest.h>

#include <cmath>

#include "knpg/environments.hpp"
#include "knpg/error.hpp"
#include "knpg/evaluation.hpp"
#include "knpg/oracle.hpp"

using namespace knpg;

namespace {

std::shared_ptr<const Kernel> tab_kernel() {
  return std::make_shared<const Kernel>(KernelSpec{KernelFamily::TabularDelta}, 1);
}

std::shared_ptr<const Kernel> rbf_kernel(double ell = 0.5) {
  return std::make_shared<const Kernel>(KernelSpec{KernelFamily::GaussianRBF, ell}, 1);
}

SampleBatch one_sample(double s0, double s1, double r) {
  SampleBatch b;
  b.omega0 = PointSet(1);
  b.omega1 = PointSet(1);
  b.omega0.push_back(&s0, 0);
  b.omega1.push_back(&s1, 0);
  b.rewards = Eigen::VectorXd::Constant(1, r);
  b.terminal = {0};
  return b;
}

// Continuous-state batch with hand-made transitions.
SampleBatch smooth_batch(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  SampleBatch b;
  b.omega0 = PointSet(1);
  b.omega1 = PointSet(1);
  b.rewards.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(), s1 = rng.uniform();
    const int a = rng.uniform() < 0.5 ? 0 : 1, a1 = rng.uniform() < 0.5 ? 0 : 1;
    b.omega0.push_back(&s, a);
    b.omega1.push_back(&s1, a1);
    b.rewards[static_cast<Eigen::Index>(i)] = std::sin(6.0 * s) + a;
    b.terminal.push_back(0);
  }
  return b;
}

// Dense system assembled entry by entry and solved by QR, independent of the library solver.
Eigen::VectorXd oracle_solve(const SampleBatch& b, const Kernel& k, double lambda, double gamma) {
  const auto n = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double kij = k(b.omega0.point(static_cast<std::size_t>(i)), b.omega0.point(static_cast<std::size_t>(j)));
      const double cij = b.terminal[static_cast<std::size_t>(i)]
                             ? 0.0
                             : k(b.omega1.point(static_cast<std::size_t>(i)), b.omega0.point(static_cast<std::size_t>(j)));
      A(i, j) = kij - gamma * cij + (i == j ? lambda * static_cast<double>(n) : 0.0);
    }
  return A.fullPivHouseholderQr().solve(b.rewards);
}

double rms(const Eigen::VectorXd& v) { return v.norm() / std::sqrt(static_cast<double>(v.size())); }

TabularMdp deterministic_chain() {
  // 3 states, 2 actions: action 0 stays, action 1 moves right (cyclic).
  std::vector<double> P(3 * 2 * 3, 0.0);
  for (int s = 0; s < 3; ++s) {
    P[(s * 2 + 0) * 3 + s] = 1.0;
    P[(s * 2 + 1) * 3 + (s + 1) % 3] = 1.0;
  }
  Eigen::MatrixXd r(3, 2);
  r << 0.0, 0.5, 1.0, 0.2, 0.3, 0.7;
  return TabularMdp(3, 2, P, r, 0.8, Eigen::VectorXd::Constant(3, 1.0 / 3.0));
}

}  // namespace

TEST(ClosedForm, SingleSampleNoLoop) {
  const ClosedFormResult res = krr_td_closed_form(one_sample(0.0, 1.0, 1.0), tab_kernel(), 0.0, 0.9);
  EXPECT_NEAR(res.q->coeffs()[0], 1.0, 1e-14);
}

TEST(ClosedForm, SingleSampleSelfLoop) {
  const SampleBatch b = one_sample(0.0, 0.0, 1.0);
  const ClosedFormResult res = krr_td_closed_form(b, tab_kernel(), 0.0, 0.9);
  EXPECT_NEAR(res.q->coeffs()[0], 10.0, 1e-12);
  EXPECT_NEAR((*res.q)(b.omega0.point(0)), 10.0, 1e-12);
}

TEST(ClosedForm, TabularMatchesDenseOracle) {
  const TabularMdp m = make_random_tabular(2, 2, 0.9, 0.0, 11);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(2, 1), 50, 3);
  const auto k = tab_kernel();
  const ClosedFormResult res = krr_td_closed_form(b, k, 0.01, 0.9);
  const Eigen::VectorXd bo = oracle_solve(b, *k, 0.01, 0.9);
  const Eigen::VectorXd f = res.q->evaluate(b.omega0), fo = k->gram(b.omega0) * bo;
  EXPECT_LT((f - fo).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + fo.cwiseAbs().maxCoeff()));
}

TEST(ClosedForm, GaussianMatchesDenseOracle) {
  const SampleBatch b = smooth_batch(60, 4);
  const auto k = rbf_kernel();
  const ClosedFormResult res = krr_td_closed_form(b, k, 0.01, 0.9);
  const Eigen::VectorXd bo = oracle_solve(b, *k, 0.01, 0.9);
  EXPECT_LT((res.q->coeffs() - bo).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + bo.cwiseAbs().maxCoeff()));
  EXPECT_LT(res.relative_residual, 1e-10);
}

TEST(ClosedForm, SingularSystemIsReported) {
  // Two copies of one transition give identical rows when lambda = 0.
  SampleBatch b = one_sample(0.0, 0.5, 1.0);
  const double s0 = 0.0, s1 = 0.5;
  b.omega0.push_back(&s0, 0);
  b.omega1.push_back(&s1, 0);
  b.rewards = Eigen::Vector2d(1.0, 1.0);
  b.terminal = {0, 0};
  EXPECT_THROW(krr_td_closed_form(b, rbf_kernel(), 0.0, 0.9), NumericalError);
}

TEST(StepSize, SingleSampleBound) {
  const StepSize st = auto_step_size(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1), 0.0, 1, 0.9);
  EXPECT_NEAR(st.eta, 0.5 / 1.9, 1e-12);
  EXPECT_EQ(st.alpha, 0.0);
  EXPECT_LT(st.spectral_radius, 1.0);
}

TEST(StepSize, LargeLambdaLimit) {
  const StepSize st = auto_step_size(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1), 1e12, 1, 0.9);
  EXPECT_LT(st.eta, 1e-12);
  EXPECT_NEAR(st.alpha, 0.5, 1e-9);
}

TEST(StepSize, RadiusBelowOneByEigenOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SampleBatch b = smooth_batch(40, seed);
    const TdSystem sys = build_td_system(b, *rbf_kernel());
    const StepSize st = auto_step_size(sys.K, sys.C, 0.01, b.size(), 0.95);
    const Eigen::MatrixXd G = iteration_matrix(sys.K, sys.C, st.eta, st.alpha, 0.95);
    EXPECT_LT(G.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
    EXPECT_NEAR(st.alpha, st.eta * 0.01 * 40, 1e-15);
  }
}

TEST(Iterate, TinyStepKeepsInit) {
  const SampleBatch b = smooth_batch(30, 2);
  const auto k = rbf_kernel();
  const auto init = krr_td_closed_form(b, k, 0.05, 0.9).q;
  TdSolverConfig cfg;
  cfg.eta = 1e-14;
  cfg.alpha = 0.0;
  cfg.iters = 5;
  const IterateResult it = kernel_td_iterate(b, k, 0.9, cfg, init);
  EXPECT_LT((it.q->evaluate(b.omega0) - init->evaluate(b.omega0)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Iterate, ConvergesToClosedForm) {
  const SampleBatch b = smooth_batch(80, 7);
  const auto k = rbf_kernel();
  const double lambda = 0.01, gamma = 0.9;
  const auto exact = krr_td_closed_form(b, k, lambda, gamma).q;
  const TdSystem sys = build_td_system(b, *k);
  const StepSize st = auto_step_size(sys.K, sys.C, lambda, b.size(), gamma);
  const double dist = exact->coeffs().norm();
  TdSolverConfig cfg;
  cfg.lambda = lambda;
  cfg.iters = td_iteration_count(1e-18, lambda, b.size(), dist, st.spectral_radius);
  const IterateResult it = kernel_td_iterate(b, k, gamma, cfg);
  EXPECT_LE(rms(it.q->evaluate(b.omega0) - exact->evaluate(b.omega0)), 1e-8);
  EXPECT_LE(std::sqrt(it.q->rkhs_norm_sq()), std::sqrt(exact->rkhs_norm_sq()) + 1e-8);
}

TEST(Iterate, TabularPathConvergesToClosedForm) {
  const TabularMdp m = make_random_tabular(4, 2, 0.9, 0.0, 5);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(2, 1), 400, 9);
  const auto k = tab_kernel();
  const auto exact = krr_td_closed_form(b, k, 0.01, 0.9).q;
  TdSolverConfig cfg;
  cfg.lambda = 0.01;
  cfg.tol = 1e-13;
  cfg.max_iters = 500000;
  const IterateResult it = kernel_td_iterate(b, k, 0.9, cfg);
  EXPECT_TRUE(it.trace.converged);
  EXPECT_LE(rms(it.q->evaluate(b.omega0) - exact->evaluate(b.omega0)), 1e-8);
}

TEST(Iterate, SymmetricCaseDecaysByRadiusEveryStep) {
  // gamma = 0 leaves a symmetric iteration matrix commuting with K.
  const SampleBatch b = smooth_batch(50, 3);
  const auto k = rbf_kernel();
  const double lambda = 0.05;
  const auto exact = krr_td_closed_form(b, k, lambda, 0.0).q;
  const TdSystem sys = build_td_system(b, *k);
  const StepSize st = auto_step_size(sys.K, sys.C, lambda, b.size(), 0.0);
  const double rho = iteration_matrix(sys.K, sys.C, st.eta, st.alpha, 0.0).eigenvalues().cwiseAbs().maxCoeff();
  TdSolverConfig cfg;
  cfg.lambda = lambda;
  cfg.iters = 200;
  const Eigen::VectorXd ref = exact->coeffs();
  const IterateResult it = kernel_td_iterate(b, k, 0.0, cfg, nullptr, &ref);
  for (std::size_t t = 1; t < it.trace.rows.size(); ++t)
    EXPECT_LE(it.trace.rows[t].error, rho * it.trace.rows[t - 1].error * (1.0 + 1e-9) + 1e-15);
}

TEST(Iterate, AverageDecayWithinEigenBound) {
  const SampleBatch b = smooth_batch(50, 8);
  const auto k = rbf_kernel();
  const double lambda = 0.05, gamma = 0.9;
  const auto exact = krr_td_closed_form(b, k, lambda, gamma).q;
  const TdSystem sys = build_td_system(b, *k);
  const StepSize st = auto_step_size(sys.K, sys.C, lambda, b.size(), gamma);
  const double rho = iteration_matrix(sys.K, sys.C, st.eta, st.alpha, gamma).eigenvalues().cwiseAbs().maxCoeff();
  TdSolverConfig cfg;
  cfg.lambda = lambda;
  cfg.iters = 400;
  const Eigen::VectorXd ref = exact->coeffs();
  const IterateResult it = kernel_td_iterate(b, k, gamma, cfg, nullptr, &ref);
  const double e0 = it.trace.rows[199].error, e1 = it.trace.rows[399].error;
  ASSERT_GT(e1, 0.0);
  EXPECT_LE(std::pow(e1 / e0, 1.0 / 200.0), rho + 1e-3);
}

TEST(Iterate, HugeStepDiverges) {
  const SampleBatch b = smooth_batch(20, 1);
  TdSolverConfig cfg;
  cfg.eta = 50.0;
  cfg.alpha = 0.0;
  cfg.iters = 5000;
  EXPECT_THROW(kernel_td_iterate(b, rbf_kernel(), 0.9, cfg), DivergenceError);
}

TEST(Iterate, IterationCountRule) {
  EXPECT_EQ(td_iteration_count(1.0, 1.0, 1, 1.0, 0.5), 0);
  const int t = td_iteration_count(1e-8, 0.1, 100, 2.0, 0.9);
  EXPECT_EQ(t, static_cast<int>(std::ceil(std::log(1e-8 * 0.1 / (100 * 4.0)) / std::log(0.9))));
}

TEST(Bellman, ZeroDiscountRewardFunction) {
  const SampleBatch b = smooth_batch(20, 2);
  const QFunction q = [&](const PointSet& ps) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::sin(6.0 * ps.state_ptr(i)[0]) + ps.action(i);
    return v;
  };
  EXPECT_LT(bellman_residuals(b, q, 0.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Bellman, DeterministicExactQIsFixedPoint) {
  const TabularMdp m = deterministic_chain();
  const SoftmaxPolicy pi(2, 1);
  // Sampled successor actions make single residuals noisy, so the successor term uses V.
  const SampleBatch b = sample_batch(m, pi, 200, 4);
  const Eigen::MatrixXd Q = exact_q(m, uniform_policy(3, 2)).table;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const int s = static_cast<int>(b.omega0.state_ptr(i)[0]), a = b.omega0.action(i);
    const int s1 = static_cast<int>(b.omega1.state_ptr(i)[0]);
    EXPECT_NEAR(b.rewards[static_cast<Eigen::Index>(i)] + 0.8 * Q.row(s1).mean() - Q(s, a), 0.0, 1e-12);
  }
}

TEST(Bellman, StochasticExactQMeanZero) {
  const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.0, 21);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(3, 1), 10000, 5);
  const auto q = exact_q_as_estimate(exact_q(m, uniform_policy(5, 3)), tab_kernel());
  const Eigen::VectorXd eps = bellman_residuals(b, as_function(q), 0.9);
  const double mean = eps.mean();
  const double sd = std::sqrt((eps.array() - mean).square().sum() / (eps.size() - 1.0));
  EXPECT_LE(std::abs(mean), 3.0 * sd / std::sqrt(10000.0));
}

TEST(Decomposition, TabularIdentityHolds) {
  const TabularMdp m = make_random_tabular(3, 2, 0.9, 0.0, 13);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(2, 1), 300, 6);
  const auto k = tab_kernel();
  const auto qh = krr_td_closed_form(b, k, 0.1, 0.9).q;
  const auto qe = exact_q_as_estimate(exact_q(m, uniform_policy(3, 2)), k);
  const DecompositionResult d = error_decomposition_residual(b, *qh, *qe, 0.1, 0.9);
  EXPECT_LT(d.residual_proof, 1e-8 * (1.0 + std::abs(d.lhs_proof)));
}

TEST(Decomposition, ZeroDiscountRidgeCase) {
  const TabularMdp m = make_random_tabular(3, 2, 0.5, 0.0, 14);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(2, 1), 200, 6);
  const auto k = tab_kernel();
  const auto qh = krr_td_closed_form(b, k, 0.1, 0.0).q;
  const auto qe = exact_q_as_estimate(exact_q(m.with_discount(0.0), uniform_policy(3, 2)), k);
  EXPECT_LT(error_decomposition_residual(b, *qh, *qe, 0.1, 0.0).residual_proof, 1e-10);
}

TEST(Decomposition, PerturbationIsDetected) {
  const TabularMdp m = make_random_tabular(3, 2, 0.9, 0.0, 13);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(2, 1), 300, 6);
  const auto k = tab_kernel();
  const auto qh = krr_td_closed_form(b, k, 0.1, 0.9).q;
  Eigen::VectorXd c = qh->coeffs();
  c[0] += 0.1;
  const QEstimate bad(k, qh->anchors_ptr(), c);
  const auto qe = exact_q_as_estimate(exact_q(m, uniform_policy(3, 2)), k);
  EXPECT_GT(error_decomposition_residual(b, bad, *qe, 0.1, 0.9).residual_proof, 1e-4);
}

TEST(Decomposition, NonRepresentableIsSkipped) {
  const SampleBatch b = smooth_batch(10, 1);
  const auto qh = krr_td_closed_form(b, rbf_kernel(), 0.1, 0.9).q;
  const QFunction zero = [](const PointSet& ps) { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ps.size())); };
  EXPECT_TRUE(error_decomposition_residual(b, *qh, zero, 0.1, 0.9).skipped);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "knpg/environments.hpp"
#include "knpg/oracle.hpp"

using namespace knpg;

namespace {

PolicyTable random_table(int S, int A, CounterRng& rng) {
  PolicyTable pi(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) pi(s, a) = 0.01 + rng.uniform();
    pi.row(s) /= pi.row(s).sum();
  }
  return pi;
}

TabularMdp two_cycle() {
  // Every action moves to the other state.
  std::vector<double> P = {0, 1, 0, 1, 1, 0, 1, 0};
  Eigen::MatrixXd r(2, 2);
  r << 0.0, 1.0, 0.5, 0.2;
  return TabularMdp(2, 2, P, r, 0.9, Eigen::Vector2d(1.0, 0.0));
}

}  // namespace

TEST(ExactQ, SingleStateGeometricSeries) {
  const TabularMdp m(1, 1, {1.0}, Eigen::MatrixXd::Ones(1, 1), 0.9, Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(exact_q(m, uniform_policy(1, 1)).table(0, 0), 10.0, 1e-12);
}

TEST(ExactQ, ZeroDiscountIsReward) {
  const TabularMdp m = make_random_tabular(4, 3, 0.9, 0.2, 5).with_discount(0.0);
  EXPECT_EQ(exact_q(m, uniform_policy(4, 3)).table, m.rewards());
}

TEST(ExactQ, MatchesValueIteration) {
  const TabularMdp m = make_random_tabular(4, 2, 0.9, 0.0, 8);
  const PolicyTable pi = uniform_policy(4, 2);
  const ExactQ q = exact_q(m, pi);
  // Plain fixed-point loop written here, independent of the library helper.
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(4, 2);
  for (int it = 0; it < 2000; ++it) {
    Eigen::MatrixXd next = m.rewards();
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < 2; ++a)
        for (int t = 0; t < 4; ++t) next(s, a) += 0.9 * m.prob(s, a, t) * Q.row(t).dot(pi.row(t));
    Q = next;
  }
  EXPECT_LT((q.table - Q).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((evaluate_by_iteration(m, pi).table - q.table).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT(bellman_residual_max(m, pi, q), 1e-10);
}

TEST(ExactQ, CsvHasOneRowPerState) {
  std::ostringstream os;
  write_q_csv(os, exact_q(two_cycle(), uniform_policy(2, 2)));
  std::size_t lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_GE(lines, 3u);
}

TEST(Optimal, SingleStateStationary) {
  const TabularMdp m(1, 2, {1.0, 1.0}, Eigen::MatrixXd::Ones(1, 2), 0.9, Eigen::VectorXd::Ones(1));
  const OptimalSolution opt = optimal_policy(m);
  EXPECT_NEAR(opt.nu[0], 1.0, 1e-15);
  EXPECT_EQ(opt.greedy[0], 0);  // tie goes to the lowest index
}

TEST(Optimal, DeterministicCycleIsUniform) {
  const OptimalSolution opt = optimal_policy(two_cycle());
  EXPECT_NEAR(opt.nu[0], 0.5, 1e-10);
  EXPECT_NEAR(opt.nu[1], 0.5, 1e-10);
  EXPECT_NEAR(opt.sigma.sum(), 1.0, 1e-12);
}

TEST(Optimal, StationaryResidual) {
  const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.3, 2);
  const OptimalSolution opt = optimal_policy(m);
  const Eigen::MatrixXd P = state_transition(m, opt.policy);
  EXPECT_LT((opt.nu.transpose() * P - opt.nu.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(opt.nu.minCoeff(), 0.0);
  EXPECT_LT(bellman_residual_max(m, opt.policy, opt.q), 1e-10);
}

TEST(Optimal, PeriodicChainFallsBackToCesaro) {
  const StationaryResult st = stationary_distribution((Eigen::Matrix2d() << 0, 1, 1, 0).finished(), 1000);
  EXPECT_NEAR(st.nu[0], 0.5, 1e-3);
}

TEST(TotalReward, OptimumBeatsRandomPolicies) {
  const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.0, 4);
  const OptimalSolution opt = optimal_policy(m);
  const double best = expected_total_reward(m, opt.policy, opt.nu);
  CounterRng rng(9);
  for (int i = 0; i < 100; ++i) EXPECT_GE(best - expected_total_reward(m, random_table(5, 3, rng), opt.nu), -1e-10);
}

TEST(TotalReward, ZeroDiscountUniformIsMeanReward) {
  const TabularMdp m = make_random_tabular(4, 3, 0.9, 0.0, 6).with_discount(0.0);
  EXPECT_NEAR(expected_total_reward(m, uniform_policy(4, 3), Eigen::VectorXd::Constant(4, 0.25)), m.rewards().mean(),
              1e-14);
}

TEST(TotalReward, PerformanceDifferenceIdentity) {
  CounterRng rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.2, seed);
    const OptimalSolution opt = optimal_policy(m);
    const PolicyTable pi = random_table(5, 3, rng);
    const PerformanceDifference pd = performance_difference(m, pi, opt);
    EXPECT_NEAR(pd.lhs, pd.rhs_discounted, 1e-10);
    EXPECT_LE(pd.lhs, 1e-10);
  }
}

TEST(TotalReward, KlVanishesAtOptimum) {
  const TabularMdp m = make_random_tabular(3, 2, 0.9, 0.0, 1);
  const OptimalSolution opt = optimal_policy(m);
  EXPECT_NEAR(expected_kl(opt, uniform_policy(3, 2)), std::log(2.0), 1e-12);
}

TEST(TabularOracleTest, GapOfUniformPolicyMatchesTables) {
  const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.0, 7);
  const TabularOracle oracle(m);
  const SoftmaxPolicy pi(3, 1);
  const double expect = oracle.optimal_reward() - expected_total_reward(m, uniform_policy(5, 3), oracle.optimum().nu);
  EXPECT_NEAR(oracle.gap(pi), expect, 1e-12);
  EXPECT_EQ(oracle.probe_points().size(), 15u);
  const Eigen::VectorXd q = oracle.q_function(pi)(oracle.probe_points());
  const Eigen::MatrixXd Q = exact_q(m, uniform_policy(5, 3)).table;
  for (std::size_t i = 0; i < 15; ++i)
    EXPECT_NEAR(q[static_cast<Eigen::Index>(i)], Q(static_cast<int>(i / 3), static_cast<int>(i % 3)), 1e-12);
}

TEST(SmoothCircleOracleTest, GapIsNonnegative) {
  const SmoothCircleMdp m;
  const SmoothCircleOracle oracle(m, 128, 64);
  EXPECT_GE(oracle.gap(SoftmaxPolicy(2, m.feature_dim())), -1e-10);
}

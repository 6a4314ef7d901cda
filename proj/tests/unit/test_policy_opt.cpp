#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "knpg/environments.hpp"
#include "knpg/error.hpp"
#include "knpg/oracle.hpp"
#include "knpg/policy_opt.hpp"

using namespace knpg;

namespace {

std::shared_ptr<const Kernel> tab_kernel() {
  return std::make_shared<const Kernel>(KernelSpec{KernelFamily::TabularDelta}, 1);
}

// f(s, a) = table(s, a) on tabular states.
std::shared_ptr<const QEstimate> table_estimate(const Eigen::MatrixXd& F) {
  auto anchors = std::make_shared<PointSet>(1);
  Eigen::VectorXd b(F.size());
  int i = 0;
  for (int s = 0; s < F.rows(); ++s)
    for (int a = 0; a < F.cols(); ++a) {
      const double x = s;
      anchors->push_back(&x, a);
      b[i++] = F(s, a);
    }
  return std::make_shared<const QEstimate>(tab_kernel(), anchors, b);
}

std::vector<Eigen::VectorXd> tab_states(int S) {
  std::vector<Eigen::VectorXd> v;
  for (int s = 0; s < S; ++s) v.push_back(Eigen::VectorXd::Constant(1, s));
  return v;
}

// Brute-force maximizer of delta <f, p> - KL(p || q) on a 2-action simplex.
double grid_argmax_p0(const Eigen::Vector2d& q, const Eigen::Vector2d& f, double delta) {
  double best = -1e300, arg = 0.0;
  for (int i = 1; i < 200000; ++i) {
    const double p = i / 200000.0;
    const double v = delta * (p * f[0] + (1 - p) * f[1]) - p * std::log(p / q[0]) - (1 - p) * std::log((1 - p) / q[1]);
    if (v > best) best = v, arg = p;
  }
  return arg;
}

ScheduleConfig tab_cfg() {
  ScheduleConfig c;
  c.regime = Regime::Tabular;
  c.lambda_base = 1.0;
  c.one_minus_cgamma = 0.5;
  return c;
}

}  // namespace

TEST(NpgStep, ZeroDeltaKeepsDistribution) {
  const SoftmaxPolicy pi = SoftmaxPolicy(3, 1).with_term(1.0, table_estimate(Eigen::MatrixXd::Random(4, 3)));
  const SoftmaxPolicy next = npg_step(pi, table_estimate(Eigen::MatrixXd::Random(4, 3)), 0.0);
  for (const auto& s : tab_states(4))
    EXPECT_LT((pi.action_distribution(s) - next.action_distribution(s)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(NpgStep, ActionConstantShiftKeepsDistribution) {
  const SoftmaxPolicy pi = SoftmaxPolicy(3, 1).with_term(1.0, table_estimate(Eigen::MatrixXd::Random(4, 3)));
  Eigen::MatrixXd c(4, 3);
  for (int s = 0; s < 4; ++s) c.row(s).setConstant(5.0 * s - 3.0);
  const SoftmaxPolicy next = npg_step(pi, table_estimate(c), 0.7);
  for (const auto& s : tab_states(4))
    EXPECT_LT((pi.action_distribution(s) - next.action_distribution(s)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NpgStep, LogThreeGivesThreeQuarters) {
  Eigen::MatrixXd f(1, 2);
  f << std::log(3.0), 0.0;
  const Eigen::VectorXd p = npg_step(SoftmaxPolicy(2, 1), table_estimate(f), 1.0).action_distribution(tab_states(1)[0]);
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(NpgStep, OldPolicyIsUnchanged) {
  const SoftmaxPolicy pi = SoftmaxPolicy(3, 1).with_term(0.5, table_estimate(Eigen::MatrixXd::Random(20, 3)));
  std::vector<Eigen::VectorXd> before;
  for (const auto& s : tab_states(20)) before.push_back(pi.action_distribution(s));
  const SoftmaxPolicy next = npg_step(pi, table_estimate(Eigen::MatrixXd::Random(20, 3)), 1.0);
  EXPECT_EQ(next.terms().size(), 2u);
  EXPECT_EQ(pi.terms().size(), 1u);
  for (int s = 0; s < 20; ++s) EXPECT_EQ(pi.action_distribution(tab_states(20)[s]), before[s]);
}

TEST(KlProximal, ZeroDeltaReturnsOldPolicy) {
  const Eigen::Vector3d q(0.2, 0.3, 0.5);
  EXPECT_LT(total_variation(kl_proximal_maximizer(q, Eigen::Vector3d(1, 2, 3), 0.0), q), 1e-3);
}

TEST(KlProximal, TwoActionsMatchClosedForm) {
  const Eigen::VectorXd p = kl_proximal_maximizer(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1.0, 0.0), 1.0);
  const double e = std::numbers::e;
  EXPECT_NEAR(p[0], e / (e + 1.0), 1e-6);
  EXPECT_NEAR(grid_argmax_p0(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1.0, 0.0), 1.0), e / (e + 1.0), 1e-5);
}

TEST(KlProximal, RandomDrawsAgree) {
  CounterRng rng(17);
  for (int draw = 0; draw < 100; ++draw) {
    const int S = 3, A = 2 + draw % 4;
    Eigen::MatrixXd F0(S, A), F1(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) F0(s, a) = 4.0 * rng.uniform() - 2.0, F1(s, a) = 4.0 * rng.uniform() - 2.0;
    const SoftmaxPolicy pi = SoftmaxPolicy(A, 1).with_term(1.0, table_estimate(F0));
    const double delta = 2.0 * rng.uniform();
    EXPECT_LE(kl_proximal_check(pi, *table_estimate(F1), delta, tab_states(S)), 1e-3) << "draw " << draw;
  }
}

TEST(KlProximal, TwoActionMaximizerMatchesBruteForce) {
  CounterRng rng(4);
  for (int i = 0; i < 10; ++i) {
    const double q0 = 0.05 + 0.9 * rng.uniform();
    const Eigen::Vector2d q(q0, 1.0 - q0), f(rng.uniform(), rng.uniform());
    const double delta = 3.0 * rng.uniform();
    EXPECT_NEAR(kl_proximal_maximizer(q, f, delta)[0], grid_argmax_p0(q, f, delta), 2e-5);
  }
}

TEST(Schedule, TabularExample) {
  const ScheduleStep st = schedule(tab_cfg(), 4, 1.0);
  EXPECT_DOUBLE_EQ(st.delta, 0.5);
  EXPECT_NEAR(st.lambda, 0.25, 1e-15);
}

TEST(Schedule, FirstStepIsOne) {
  for (double a : {0.2, 0.5, 1.5}) {
    ScheduleConfig c = tab_cfg();
    c.step_exponent = a;
    EXPECT_EQ(schedule(c, 1, 1.0).delta, 1.0);
  }
}

TEST(Schedule, SobolevLambdaExponent) {
  ScheduleConfig c;
  c.regime = Regime::Sobolev;
  c.sobolev_m = 2.0;
  c.dim_d = 1.0;
  c.lambda_base = 1.0;
  c.one_minus_cgamma = 0.1;
  EXPECT_NEAR(schedule(c, 16, 1.0).lambda, 0.1 / std::pow(16.0, 2.0 / 3.0), 1e-15);
}

TEST(Schedule, MonotoneInK) {
  for (Regime r : {Regime::Tabular, Regime::Sobolev, Regime::NTK, Regime::Gaussian}) {
    ScheduleConfig c;
    c.regime = r;
    c.dim_d = 2.0;
    c.sobolev_m = 2.0;
    c.n_base = 10.0;
    c.n_min = 1;
    c.n_max = 1u << 30;
    for (double proxy : {1.0, 3.0}) {
      ScheduleStep prev = schedule(c, 1, proxy);
      for (int k = 2; k <= 200; ++k) {
        const ScheduleStep st = schedule(c, k, proxy);
        EXPECT_LT(st.lambda, prev.lambda) << to_string(r) << " k=" << k;
        EXPECT_GE(st.n, prev.n) << to_string(r) << " k=" << k;
        EXPECT_GT(st.n_raw, prev.n_raw) << to_string(r) << " k=" << k;
        EXPECT_LT(st.delta, prev.delta);
        prev = st;
      }
    }
  }
}

TEST(Schedule, ClampsSampleCount) {
  ScheduleConfig c = tab_cfg();
  c.n_min = 50;
  c.n_max = 60;
  EXPECT_EQ(schedule(c, 1, 1.0).n, 50u);
  EXPECT_EQ(schedule(c, 100000, 1.0).n, 60u);
}

TEST(Schedule, Errors) {
  EXPECT_THROW(parse_regime("quadratic"), ConfigError);
  EXPECT_THROW(schedule(tab_cfg(), 0, 1.0), ConfigError);
  ScheduleConfig c = tab_cfg();
  c.one_minus_cgamma = 0.0;
  EXPECT_THROW(schedule(c, 1, 1.0), ConfigError);
}

TEST(NormProxy, Examples) {
  const SoftmaxPolicy empty(2, 1);
  EXPECT_EQ(empty.norm_proxy(NormProxyMode::CoefficientNorm), 0.0);
  EXPECT_EQ(empty.norm_proxy(NormProxyMode::Constant), 1.0);
  auto anchors = std::make_shared<PointSet>(1);
  const double x = 0.0;
  anchors->push_back(&x, 0);
  const auto zero = std::make_shared<const QEstimate>(tab_kernel(), anchors, Eigen::VectorXd::Zero(1));
  EXPECT_EQ(empty.with_term(1.0, zero).norm_proxy(NormProxyMode::CoefficientNorm), 0.0);
  const auto two = std::make_shared<const QEstimate>(tab_kernel(), anchors, Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_NEAR(empty.with_term(1.0, two).norm_proxy(NormProxyMode::CoefficientNorm), 2.0, 1e-15);
}

TEST(RunNpg, ZeroIterationsKeepsInitialPolicy) {
  const TabularMdp m = make_random_tabular(3, 2, 0.9, 0.0, 1);
  NpgConfig cfg;
  cfg.outer_iters = 0;
  const NpgResult res = run_npg(m, tab_kernel(), cfg, 1);
  EXPECT_TRUE(res.log.records.empty());
  EXPECT_TRUE(res.policy.terms().empty());
}

TEST(RunNpg, TabularRunIsDeterministicAndImproves) {
  const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.0, 3);
  const TabularOracle oracle(m);
  NpgConfig cfg;
  cfg.schedule = tab_cfg();
  cfg.schedule.n_base = 0.1;
  cfg.schedule.lambda_base = 0.01;
  cfg.schedule.n_max = 2000;
  cfg.td.mode = TdMode::ClosedForm;
  cfg.outer_iters = 30;
  const NpgResult a = run_npg(m, tab_kernel(), cfg, 5, &oracle);
  const NpgResult b = run_npg(m, tab_kernel(), cfg, 5, &oracle);
  ASSERT_EQ(a.log.records.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(a.log.records[i].gap, b.log.records[i].gap);
    EXPECT_EQ(a.log.records[i].k, static_cast<int>(i) + 1);
    EXPECT_LE(a.log.records[i].min_gap, a.log.records[i].bound_corrected + 1e-9);
  }
  EXPECT_LT(a.log.min_gap_all(), 0.5 * a.log.initial_gap);
}

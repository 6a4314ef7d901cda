#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "knpg/environments.hpp"
#include "knpg/error.hpp"

using namespace knpg;

namespace {

void expect_valid(const TabularMdp& m) {
  for (int s = 0; s < m.num_states(); ++s)
    for (int a = 0; a < m.num_actions(); ++a) {
      double sum = 0.0;
      for (int t = 0; t < m.num_states(); ++t) {
        EXPECT_GE(m.prob(s, a, t), 0.0);
        sum += m.prob(s, a, t);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  EXPECT_NEAR(m.initial_distribution().sum(), 1.0, 1e-12);
}

// Reference cart-pole step written out independently of the library.
Eigen::Vector4d ref_cartpole(const Eigen::Vector4d& s, int a) {
  const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, F = a == 1 ? 10.0 : -10.0, dt = 0.02;
  const double th = s[2], w = s[3];
  const double tmp = (F + mp * l * w * w * std::sin(th)) / (mc + mp);
  const double alpha = (g * std::sin(th) - std::cos(th) * tmp) /
                       (l * (4.0 / 3.0 - mp * std::cos(th) * std::cos(th) / (mc + mp)));
  const double acc = tmp - mp * l * alpha * std::cos(th) / (mc + mp);
  Eigen::Vector4d n;
  n[1] = s[1] + dt * acc;
  n[0] = s[0] + dt * n[1];
  n[3] = w + dt * alpha;
  n[2] = th + dt * n[3];
  return n;
}

double acrobot_energy(const Eigen::Vector4d& s) {
  const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
  const double d11 = 0.25 + (1.0 + 0.25 + std::cos(t2)) + 2.0;
  const double d12 = (0.25 + 0.5 * std::cos(t2)) + 1.0;
  const double d22 = 0.25 + 1.0;
  const double kinetic = 0.5 * d11 * w1 * w1 + d12 * w1 * w2 + 0.5 * d22 * w2 * w2;
  const double potential = -(0.5 + 1.0) * 9.8 * std::cos(t1) - 0.5 * 9.8 * std::cos(t1 + t2);
  return kinetic + potential;
}

}  // namespace

TEST(RandomTabular, OneByOne) {
  const TabularMdp m = make_random_tabular(1, 1, 0.9, 0.0, 3);
  EXPECT_EQ(m.prob(0, 0, 0), 1.0);
}

TEST(RandomTabular, SeedDetermines) {
  const TabularMdp a = make_random_tabular(5, 3, 0.9, 0.5, 7), b = make_random_tabular(5, 3, 0.9, 0.5, 7);
  for (int s = 0; s < 5; ++s)
    for (int x = 0; x < 3; ++x)
      for (int t = 0; t < 5; ++t) EXPECT_EQ(a.prob(s, x, t), b.prob(s, x, t));
  EXPECT_EQ(a.rewards(), b.rewards());
}

TEST(RandomTabular, InvariantsOverManySeeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const TabularMdp m = make_random_tabular(5, 3, 0.9, (seed % 10) / 10.0, seed);
    expect_valid(m);
    EXPECT_GE(m.rewards().minCoeff(), 0.0);
    EXPECT_LE(m.rewards().maxCoeff(), 1.0);
    if (::testing::Test::HasFailure()) break;
  }
}

TEST(RandomTabular, RejectsBadInput) {
  EXPECT_THROW(make_random_tabular(0, 1, 0.9, 0.0, 1), ConfigError);
  EXPECT_THROW(make_random_tabular(2, 2, 0.9, 1.0, 1), ConfigError);
  EXPECT_THROW(make_random_tabular(2, 2, 1.0, 0.0, 1), ConfigError);
}

TEST(Gridworld, Valid) {
  const TabularMdp g = make_gridworld(4, 3, 0.95, 0.2);
  expect_valid(g);
  EXPECT_EQ(g.reward(11, 0), 1.0);
  EXPECT_EQ(g.prob(11, 2, 0), 1.0);
}

TEST(CartPole, ForcePushesPoleOpposite) {
  CartPole env;
  CounterRng rng(1);
  const StepResult r = env.step(Eigen::Vector4d::Zero(), 1, rng);
  EXPECT_GT(r.next_state[1], 0.0);  // cart accelerates right
  EXPECT_LT(r.next_state[3], 0.0);  // pole rotates left
  EXPECT_EQ(r.reward, 1.0);
}

TEST(CartPole, MatchesReferenceAndAlwaysLeftFalls) {
  CartPole env;
  CounterRng rng(5);
  Eigen::VectorXd s = env.sample_initial(rng);
  Eigen::Vector4d ref = s;
  int steps = 0;
  for (; steps < 500; ++steps) {
    const StepResult r = env.step(s, 0, rng);
    ref = ref_cartpole(ref, 0);
    EXPECT_LT((r.next_state - ref).cwiseAbs().maxCoeff(), 1e-12);
    s = r.next_state;
    if (r.done) break;
  }
  EXPECT_LT(steps + 1, 200);
}

TEST(CartPole, StepIsBitwiseDeterministic) {
  CartPole env;
  CounterRng r1(1), r2(2);
  const Eigen::Vector4d s(0.1, -0.2, 0.03, 0.4);
  EXPECT_EQ(env.step(s, 1, r1).next_state, env.step(s, 1, r2).next_state);
}

TEST(CartPole, ObservationScaling) {
  CartPole env;
  const Eigen::VectorXd f = env.observe(Eigen::Vector4d(2.4, 3.0, 0.21, -3.0));
  EXPECT_TRUE(f.isApprox(Eigen::Vector4d(1, 1, 1, -1)));
}

TEST(CartPole, EpisodeRewardIsLength) {
  CartPole env;
  const EpisodeStats st = run_episodes(env, SoftmaxPolicy(2, 4), 20, 4);
  for (std::size_t i = 0; i < st.returns.size(); ++i) {
    EXPECT_EQ(st.returns[i], static_cast<double>(st.lengths[i]));
    EXPECT_LE(st.returns[i], 500.0);
  }
}

TEST(Acrobot, PassiveFromRestHangsForever) {
  Acrobot env;
  CounterRng rng(1);
  Eigen::VectorXd s = Eigen::Vector4d::Zero();
  double total = 0.0;
  for (int t = 0; t < env.max_episode_steps(); ++t) {
    const StepResult r = env.step(s, 1, rng);
    total += r.reward;
    ASSERT_FALSE(r.done);
    s = r.next_state;
  }
  EXPECT_EQ(total, -500.0);
  EXPECT_LT(s.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Acrobot, PassiveMotionConservesEnergy) {
  Acrobot env;
  CounterRng rng(1);
  Eigen::VectorXd s = Eigen::Vector4d(0.8, -0.4, 0.0, 0.0);
  const double e0 = acrobot_energy(s);
  for (int t = 0; t < 50; ++t) s = env.step(s, 1, rng).next_state;
  EXPECT_NEAR(acrobot_energy(s), e0, 1e-2 * std::abs(e0));
}

TEST(Acrobot, FeaturesAreSixDimensional) {
  Acrobot env;
  const Eigen::VectorXd f = env.observe(Eigen::Vector4d(0.0, std::numbers::pi / 2, 4 * std::numbers::pi, 0.0));
  ASSERT_EQ(f.size(), 6);
  EXPECT_NEAR(f[0], 1.0, 1e-15);
  EXPECT_NEAR(f[3], 1.0, 1e-15);
  EXPECT_NEAR(f[4], 1.0, 1e-15);
}

TEST(SmoothCircle, DensityIntegratesToOne) {
  SmoothCircleMdp m;
  for (double th : {0.0, 0.37, 0.95})
    for (int a : {0, 1}) {
      double sum = 0.0;
      const int N = 4000;
      for (int j = 0; j < N; ++j) sum += m.density(th, a, (j + 0.5) / N) / N;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(SmoothCircle, DiscretizationIsStochastic) { expect_valid(SmoothCircleMdp().discretize(64)); }

TEST(SmoothCircle, ThetaRoundTrip) {
  SmoothCircleMdp m;
  for (double th : {0.0, 0.1, 0.5, 0.9}) {
    const Eigen::VectorXd f = m.observe(Eigen::VectorXd::Constant(1, th));
    EXPECT_NEAR(m.theta_of(f.data()), th, 1e-14);
  }
}

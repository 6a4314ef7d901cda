#include <benchmark/benchmark.h>

#include "knpg/environments.hpp"
#include "knpg/evaluation.hpp"
#include "knpg/oracle.hpp"
#include "knpg/policy_opt.hpp"

using namespace knpg;

namespace {

SampleBatch circle_batch(std::size_t n) {
  static const SmoothCircleMdp circle;
  return sample_batch(circle, SoftmaxPolicy(2, circle.feature_dim()), n, 1);
}

std::shared_ptr<const Kernel> rbf() {
  return std::make_shared<const Kernel>(KernelSpec{KernelFamily::GaussianRBF, 0.5}, 2);
}

void BM_Gram(benchmark::State& st) {
  const SampleBatch b = circle_batch(static_cast<std::size_t>(st.range(0)));
  const auto k = rbf();
  for (auto _ : st) benchmark::DoNotOptimize(k->gram(b.omega0));
}
BENCHMARK(BM_Gram)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_ClosedForm(benchmark::State& st) {
  const SampleBatch b = circle_batch(static_cast<std::size_t>(st.range(0)));
  const auto k = rbf();
  for (auto _ : st) benchmark::DoNotOptimize(krr_td_closed_form(b, k, 0.01, 0.9));
}
BENCHMARK(BM_ClosedForm)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_IterateDense(benchmark::State& st) {
  const SampleBatch b = circle_batch(256);
  const auto k = rbf();
  TdSolverConfig cfg;
  cfg.lambda = 0.01;
  cfg.iters = static_cast<int>(st.range(0));
  cfg.record_trace = false;
  for (auto _ : st) benchmark::DoNotOptimize(kernel_td_iterate(b, k, 0.9, cfg));
}
BENCHMARK(BM_IterateDense)->Arg(10)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_IterateTabular(benchmark::State& st) {
  const TabularMdp m = make_random_tabular(5, 3, 0.9, 0.0, 7);
  const SampleBatch b = sample_batch(m, SoftmaxPolicy(3, 1), static_cast<std::size_t>(st.range(0)), 1);
  const auto k = std::make_shared<const Kernel>(KernelSpec{KernelFamily::TabularDelta}, 1);
  TdSolverConfig cfg;
  cfg.lambda = 0.001;
  cfg.iters = 1000;
  cfg.record_trace = false;
  for (auto _ : st) benchmark::DoNotOptimize(kernel_td_iterate(b, k, 0.9, cfg));
}
BENCHMARK(BM_IterateTabular)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_CartPoleSampling(benchmark::State& st) {
  const CartPole env;
  const SoftmaxPolicy pi(2, 4);
  SamplingOptions opts;
  opts.scheme = SamplingScheme::Episodic;
  for (auto _ : st) benchmark::DoNotOptimize(sample_batch(env, pi, 2048, 3, opts));
}
BENCHMARK(BM_CartPoleSampling)->Unit(benchmark::kMillisecond);

void BM_PolicyDistribution(benchmark::State& st) {
  const SampleBatch b = circle_batch(512);
  SoftmaxPolicy pi(2, 2);
  for (int j = 0; j < st.range(0); ++j) pi = pi.with_term(1.0, krr_td_closed_form(b, rbf(), 0.01, 0.9).q);
  const Eigen::Vector2d s(0.3, -0.2);
  for (auto _ : st) benchmark::DoNotOptimize(pi.action_distribution(s));
}
BENCHMARK(BM_PolicyDistribution)->Arg(1)->Arg(10);

void BM_ExactQ(benchmark::State& st) {
  const TabularMdp m = make_random_tabular(static_cast<int>(st.range(0)), 3, 0.9, 0.0, 2);
  const PolicyTable pi = uniform_policy(m.num_states(), 3);
  for (auto _ : st) benchmark::DoNotOptimize(exact_q(m, pi));
}
BENCHMARK(BM_ExactQ)->Arg(5)->Arg(100);

}  // namespace

BENCHMARK_MAIN();

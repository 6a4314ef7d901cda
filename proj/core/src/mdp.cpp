#include "knpg/mdp.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "knpg/error.hpp"

namespace knpg {

namespace {

std::string describe_state(const Eigen::VectorXd& s) {
  std::string out = "(";
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += format_double(s[i]);
  }
  return out + ")";
}

void check_finite(const Eigen::VectorXd& s, const char* where) {
  if (!s.allFinite()) throw SamplingError(std::string(where) + ": non-finite state", describe_state(s));
}

void check_transition(const Eigen::VectorXd& s, int a, const Eigen::VectorXd& next) {
  if (!next.allFinite())
    throw SamplingError("transition: non-finite state",
                        describe_state(s) + " action " + std::to_string(a) + " -> " + describe_state(next));
}

void check_reward(const MdpModel& mdp, double r) {
  if (!std::isfinite(r) || std::abs(r) > mdp.reward_bound() * (1.0 + 1e-12))
    throw SamplingError("reward outside the declared bound r_max", format_double(r));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

TransitionSample SampleBatch::sample(std::size_t i) const {
  return {omega0.point(i), rewards[static_cast<Eigen::Index>(i)], omega1.point(i), terminal[i] != 0};
}

SamplingScheme parse_sampling_scheme(const std::string& name) {
  if (name == "one_step") return SamplingScheme::OneStep;
  if (name == "episodic") return SamplingScheme::Episodic;
  throw ConfigError("unknown sampling scheme: " + name);
}

SampleBatch sample_batch(const MdpModel& mdp, const SoftmaxPolicy& policy, std::size_t n,
                         std::uint64_t seed, const SamplingOptions& opts, const std::string& policy_id) {
  if (n < 1) throw ConfigError("sample_batch: n must be at least 1");
  if (policy.num_actions() != mdp.num_actions() || policy.state_dim() != mdp.feature_dim())
    throw ConfigError("sample_batch: policy does not match the MDP");
  if (opts.explore_prob < 0.0 || opts.explore_prob > 1.0)
    throw ConfigError("sample_batch: explore_prob must lie in [0, 1]");

  const int fd = mdp.feature_dim();
  const CounterRng base(seed);
  SampleBatch batch;
  batch.seed = seed;
  batch.policy_id = policy_id;
  batch.omega0 = PointSet(fd);
  batch.omega1 = PointSet(fd);
  batch.omega0.reserve(n);
  batch.omega1.reserve(n);
  batch.rewards.resize(static_cast<Eigen::Index>(n));
  batch.terminal.assign(n, 0);

  if (opts.scheme == SamplingScheme::OneStep) {
    std::vector<double> o0(n * fd), o1(n * fd);
    std::vector<int> a0(n), a1(n);
    std::vector<unsigned char> done(n);
    std::vector<double> rew(n);
    std::vector<std::string> failure(n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      try {
        CounterRng rng = base.split(i);
        const bool explore = rng.uniform() < opts.explore_prob;
        const Eigen::VectorXd s0 = explore ? mdp.sample_explore(rng) : mdp.sample_initial(rng);
        check_finite(s0, "initial state");
        const Eigen::VectorXd f0 = mdp.observe(s0);
        a0[i] = policy.sample_action(f0.data(), rng);
        StepResult st = mdp.step(s0, a0[i], rng);
        check_transition(s0, a0[i], st.next_state);
        check_reward(mdp, st.reward);
        const Eigen::VectorXd f1 = mdp.observe(st.next_state);
        a1[i] = policy.sample_action(f1.data(), rng);
        std::copy(f0.data(), f0.data() + fd, o0.begin() + i * fd);
        std::copy(f1.data(), f1.data() + fd, o1.begin() + i * fd);
        rew[i] = st.reward;
        done[i] = st.done ? 1 : 0;
      } catch (const SamplingError& e) {
        failure[i] = std::string(e.what()) + "|" + e.state();
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!failure[i].empty()) {
        const auto bar = failure[i].find('|');
        throw SamplingError(failure[i].substr(0, bar), failure[i].substr(bar + 1));
      }
      batch.omega0.push_back(o0.data() + i * fd, a0[i]);
      batch.omega1.push_back(o1.data() + i * fd, a1[i]);
      batch.rewards[static_cast<Eigen::Index>(i)] = rew[i];
      batch.terminal[i] = done[i];
    }
    return batch;
  }

  const int cap = mdp.max_episode_steps();
  if (cap <= 0) throw ConfigError("episodic sampling needs an MDP with an episode cap");
  std::size_t count = 0;
  for (std::uint64_t episode = 0; count < n; ++episode) {
    CounterRng rng = base.split(episode);
    const bool explore = rng.uniform() < opts.explore_prob;
    Eigen::VectorXd s = explore ? mdp.sample_explore(rng) : mdp.sample_initial(rng);
    check_finite(s, "initial state");
    Eigen::VectorXd f = mdp.observe(s);
    int a = policy.sample_action(f.data(), rng);
    double ret = 0.0;
    for (int t = 1; count < n; ++t) {
      StepResult st = mdp.step(s, a, rng);
      check_transition(s, a, st.next_state);
      check_reward(mdp, st.reward);
      const Eigen::VectorXd f1 = mdp.observe(st.next_state);
      const int a1 = policy.sample_action(f1.data(), rng);
      batch.omega0.push_back(f.data(), a);
      batch.omega1.push_back(f1.data(), a1);
      batch.rewards[static_cast<Eigen::Index>(count)] = st.reward;
      batch.terminal[count] = st.done ? 1 : 0;
      ++count;
      ret += st.reward;
      if (st.done || t >= cap) {
        if (!explore) batch.episode_returns.push_back(ret);
        break;
      }
      s = std::move(st.next_state);
      f = f1;
      a = a1;
    }
  }
  return batch;
}

double EpisodeStats::mean() const {
  if (returns.empty()) return 0.0;
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

double EpisodeStats::stddev() const {
  if (returns.size() < 2) return 0.0;
  const double m = mean();
  double s = 0.0;
  for (double r : returns) s += (r - m) * (r - m);
  return std::sqrt(s / static_cast<double>(returns.size() - 1));
}

EpisodeStats run_episodes(const MdpModel& mdp, const SoftmaxPolicy& policy, int episodes,
                          std::uint64_t seed, int max_steps) {
  const int cap = max_steps > 0 ? max_steps : mdp.max_episode_steps();
  if (cap <= 0) throw ConfigError("run_episodes: no episode cap");
  EpisodeStats stats;
  stats.returns.assign(episodes, 0.0);
  stats.lengths.assign(episodes, 0);
  const CounterRng base(seed);
  for (int e = 0; e < episodes; ++e) {
    CounterRng rng = base.split(static_cast<std::uint64_t>(e));
    Eigen::VectorXd s = mdp.sample_initial(rng);
    double ret = 0.0;
    int t = 0;
    while (t < cap) {
      const Eigen::VectorXd f = mdp.observe(s);
      const int a = policy.sample_action(f.data(), rng);
      StepResult st = mdp.step(s, a, rng);
      check_transition(s, a, st.next_state);
      ret += st.reward;
      ++t;
      if (st.done) break;
      s = std::move(st.next_state);
    }
    stats.returns[e] = ret;
    stats.lengths[e] = t;
  }
  return stats;
}

void write_batch_csv(std::ostream& os, const SampleBatch& batch) {
  const int d = batch.omega0.state_dim();
  for (int k = 0; k < d; ++k) os << "s0_" << k << ',';
  os << "a0,r,";
  for (int k = 0; k < d; ++k) os << "s1_" << k << ',';
  os << "a1,done\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int k = 0; k < d; ++k) os << format_double(batch.omega0.state_ptr(i)[k]) << ',';
    os << batch.omega0.action(i) << ',' << format_double(batch.rewards[static_cast<Eigen::Index>(i)]) << ',';
    for (int k = 0; k < d; ++k) os << format_double(batch.omega1.state_ptr(i)[k]) << ',';
    os << batch.omega1.action(i) << ',' << static_cast<int>(batch.terminal[i]) << '\n';
  }
}

SampleBatch read_batch_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw ParseError("batch csv: missing header", 1);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 5 || (header.size() - 4) % 2 != 0 || header.back() != "done")
    throw ParseError("batch csv: unexpected header", 1);
  const int d = static_cast<int>((header.size() - 4) / 2);
  SampleBatch batch;
  batch.omega0 = PointSet(d);
  batch.omega1 = PointSet(d);
  std::vector<double> rewards;
  std::vector<double> row(header.size());
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end && col < row.size()) {
      const char* comma = std::find(p, end, ',');
      auto res = std::from_chars(p, comma, row[col]);
      if (res.ec != std::errc() || res.ptr != comma)
        throw ParseError("batch csv: bad number in column " + std::to_string(col + 1), lineno);
      ++col;
      p = comma + 1;
    }
    if (col != row.size() || p <= end) throw ParseError("batch csv: wrong column count", lineno);
    batch.omega0.push_back(row.data(), static_cast<int>(row[d]));
    rewards.push_back(row[d + 1]);
    batch.omega1.push_back(row.data() + d + 2, static_cast<int>(row[2 * d + 2]));
    batch.terminal.push_back(row[2 * d + 3] != 0.0 ? 1 : 0);
  }
  batch.rewards = Eigen::Map<Eigen::VectorXd>(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
  return batch;
}

}  // namespace knpg

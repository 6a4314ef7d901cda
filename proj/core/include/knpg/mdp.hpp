#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "knpg/kernels.hpp"
#include "knpg/policy.hpp"
#include "knpg/rng.hpp"

namespace knpg {

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;
};

// Raw states live in environment units; observe() maps them to kernel features.
class MdpModel {
 public:
  virtual ~MdpModel() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int feature_dim() const { return state_dim(); }
  virtual int num_actions() const = 0;
  virtual double discount() const = 0;
  virtual double reward_bound() const = 0;
  // Episode cap, 0 for continuing tasks.
  virtual int max_episode_steps() const { return 0; }

  virtual Eigen::VectorXd sample_initial(CounterRng& rng) const = 0;
  // Draw used by restart-explore mixing. Defaults to the initial distribution.
  virtual Eigen::VectorXd sample_explore(CounterRng& rng) const { return sample_initial(rng); }
  virtual StepResult step(const Eigen::VectorXd& s, int a, CounterRng& rng) const = 0;
  virtual Eigen::VectorXd observe(const Eigen::VectorXd& raw) const { return raw; }
};

// One (s, a, r, s', a') quadruplet in feature coordinates. terminal marks a transition
// into an absorbing state, whose successor value is zero.
struct TransitionSample {
  StateAction omega0;
  double reward = 0.0;
  StateAction omega1;
  bool terminal = false;
};

struct SampleBatch {
  PointSet omega0;
  PointSet omega1;
  Eigen::VectorXd rewards;
  std::vector<unsigned char> terminal;
  std::uint64_t seed = 0;
  std::string policy_id;
  // Episode returns completed while sampling (episodic scheme only).
  std::vector<double> episode_returns;

  std::size_t size() const { return omega0.size(); }
  TransitionSample sample(std::size_t i) const;
};

enum class SamplingScheme { OneStep, Episodic };

struct SamplingOptions {
  SamplingScheme scheme = SamplingScheme::OneStep;
  // Restart-explore probability rho.
  double explore_prob = 0.3;
};

SamplingScheme parse_sampling_scheme(const std::string& name);

// Draws n quadruplets under the policy. Deterministic in (mdp, policy, n, seed).
SampleBatch sample_batch(const MdpModel& mdp, const SoftmaxPolicy& policy, std::size_t n,
                         std::uint64_t seed, const SamplingOptions& opts = {},
                         const std::string& policy_id = "");

struct EpisodeStats {
  std::vector<double> returns;
  std::vector<int> lengths;
  double mean() const;
  double stddev() const;
};

// Undiscounted returns of full episodes from the initial distribution.
EpisodeStats run_episodes(const MdpModel& mdp, const SoftmaxPolicy& policy, int episodes,
                          std::uint64_t seed, int max_steps = 0);

void write_batch_csv(std::ostream& os, const SampleBatch& batch);
SampleBatch read_batch_csv(std::istream& is);

// Fixed-format double printing shared by every CSV writer.
std::string format_double(double v);

}  // namespace knpg

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "knpg/kernels.hpp"
#include "knpg/mdp.hpp"
#include "knpg/oracle.hpp"
#include "knpg/policy_opt.hpp"

namespace knpg::harness {

enum class ExperimentKind { EvalRate, Train, ScheduleSweep, Diagnostics };
ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind k);

struct EnvironmentConfig {
  // tabular_random | gridworld | cartpole | acrobot | smooth_circle
  std::string name = "tabular_random";
  int states = 5;
  int actions = 3;
  double sparsity = 0.0;
  std::uint64_t seed = 7;  // MDP generator seed, independent of run seeds
  int width = 4;
  int height = 4;
  double slip = 0.1;
  std::optional<double> gamma;  // unset keeps the environment default
  int max_steps = 0;            // 0 keeps the environment default
  std::vector<double> explore_low, explore_high;
  double drift = 0.1;
  double noise = 0.1;
};

struct DiagnosticsConfig {
  std::size_t n = 500;
  int oracle_grid = 512;  // smooth_circle only
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Train;
  EnvironmentConfig environment;
  KernelSpec kernel;
  NpgConfig npg;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> n_grid;
  std::vector<double> exponents;
  DiagnosticsConfig diagnostics;
  std::string output_dir = "out";
  int threads = 1;
};

// Throws ParseError (with line) on malformed JSON and ConfigError on bad or unknown fields.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& cfg);

// Resolved config with every default filled in, as pretty JSON.
std::string to_json_text(const ExperimentConfig& cfg);

// "3" or "1,2,5" or "1-10".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

std::unique_ptr<MdpModel> make_environment(const EnvironmentConfig& cfg);
// Null when the environment has no exact oracle.
std::unique_ptr<PolicyOracle> make_oracle(const MdpModel& mdp, int grid = 512);

}  // namespace knpg::harness

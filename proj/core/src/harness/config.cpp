#include "knpg/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "knpg/environments.hpp"
#include "knpg/error.hpp"

namespace knpg::harness {

using json = nlohmann::ordered_json;

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "eval-rate") return ExperimentKind::EvalRate;
  if (name == "train" || name == "npg-train") return ExperimentKind::Train;
  if (name == "schedule-sweep") return ExperimentKind::ScheduleSweep;
  if (name == "diagnostics") return ExperimentKind::Diagnostics;
  throw ConfigError("unknown experiment kind: " + name);
}

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::EvalRate: return "eval-rate";
    case ExperimentKind::Train: return "train";
    case ExperimentKind::ScheduleSweep: return "schedule-sweep";
    case ExperimentKind::Diagnostics: return "diagnostics";
  }
  return "unknown";
}

namespace {

// Reads keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  ~Section() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }
  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }
  std::optional<json> sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return std::optional<json>(std::in_place, *it);
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown field '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  const std::size_t end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), line_of_byte(text, e.byte));
  }
  ExperimentConfig cfg;
  Section top(root, "config");

  std::string kind = to_string(cfg.kind);
  top.get("experiment", kind);
  cfg.kind = parse_experiment_kind(kind);
  top.get("output_dir", cfg.output_dir);
  top.get("threads", cfg.threads);
  top.get("seeds", cfg.seeds);
  top.get("n_grid", cfg.n_grid);
  top.get("exponents", cfg.exponents);

  if (auto j = top.sub("environment")) {
    Section s(*j, "environment");
    EnvironmentConfig& e = cfg.environment;
    s.get("name", e.name);
    s.get("states", e.states);
    s.get("actions", e.actions);
    s.get("sparsity", e.sparsity);
    s.get("seed", e.seed);
    s.get("width", e.width);
    s.get("height", e.height);
    s.get("slip", e.slip);
    s.get("gamma", e.gamma);
    s.get("max_steps", e.max_steps);
    s.get("explore_low", e.explore_low);
    s.get("explore_high", e.explore_high);
    s.get("drift", e.drift);
    s.get("noise", e.noise);
    s.finish();
  }
  if (auto j = top.sub("kernel")) {
    Section s(*j, "kernel");
    std::string family = to_string(cfg.kernel.family), coupling = to_string(cfg.kernel.coupling);
    s.get("family", family);
    s.get("coupling", coupling);
    s.get("length_scale", cfg.kernel.length_scale);
    s.get("smoothness", cfg.kernel.smoothness);
    s.finish();
    cfg.kernel.family = parse_kernel_family(family);
    cfg.kernel.coupling = parse_action_coupling(coupling);
  }
  if (auto j = top.sub("schedule")) {
    Section s(*j, "schedule");
    ScheduleConfig& c = cfg.npg.schedule;
    std::string regime = to_string(c.regime);
    std::string proxy = c.norm_proxy_mode == NormProxyMode::Constant ? "constant" : "coefficient_norm";
    s.get("regime", regime);
    s.get("step_exponent", c.step_exponent);
    s.get("one_minus_cgamma", c.one_minus_cgamma);
    s.get("sobolev_m", c.sobolev_m);
    s.get("dim_d", c.dim_d);
    s.get("tabular_nu", c.tabular_nu);
    s.get("gaussian_eps", c.gaussian_eps);
    s.get("n_base", c.n_base);
    s.get("lambda_base", c.lambda_base);
    s.get("n_min", c.n_min);
    s.get("n_max", c.n_max);
    s.get("norm_proxy_mode", proxy);
    s.get("proxy_floor", c.proxy_floor);
    s.finish();
    c.regime = parse_regime(regime);
    c.norm_proxy_mode = parse_norm_proxy_mode(proxy);
  }
  if (auto j = top.sub("td")) {
    Section s(*j, "td");
    TdSolverConfig& t = cfg.npg.td;
    std::string mode = t.mode == TdMode::ClosedForm ? "closed_form" : "iterative";
    s.get("mode", mode);
    s.get("lambda", t.lambda);
    s.get("eta", t.eta);
    s.get("alpha", t.alpha);
    s.get("iters", t.iters);
    s.get("max_iters", t.max_iters);
    s.get("tol", t.tol);
    s.finish();
    t.mode = parse_td_mode(mode);
  }
  if (auto j = top.sub("sampling")) {
    Section s(*j, "sampling");
    std::string scheme = cfg.npg.sampling.scheme == SamplingScheme::Episodic ? "episodic" : "one_step";
    s.get("scheme", scheme);
    s.get("explore_prob", cfg.npg.sampling.explore_prob);
    s.finish();
    cfg.npg.sampling.scheme = parse_sampling_scheme(scheme);
  }
  if (auto j = top.sub("training")) {
    Section s(*j, "training");
    NpgConfig& n = cfg.npg;
    s.get("outer_iters", n.outer_iters);
    s.get("eval_episodes", n.eval_episodes);
    s.get("final_eval_episodes", n.final_eval_episodes);
    s.get("warm_start", n.warm_start);
    s.get("compaction_every", n.compaction_every);
    s.get("compaction_points", n.compaction_points);
    s.finish();
  }
  if (auto j = top.sub("diagnostics")) {
    Section s(*j, "diagnostics");
    s.get("n", cfg.diagnostics.n);
    s.get("oracle_grid", cfg.diagnostics.oracle_grid);
    s.finish();
  }
  top.finish();
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& cfg) {
  validate(cfg.npg.schedule);
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  if (cfg.npg.outer_iters < 0) throw ConfigError("training.outer_iters must be nonnegative");
  if (cfg.npg.eval_episodes < 0 || cfg.npg.final_eval_episodes < 0)
    throw ConfigError("training: episode counts must be nonnegative");
  if (cfg.npg.td.max_iters < 1) throw ConfigError("td.max_iters must be positive");
  if (!(cfg.npg.td.tol > 0.0)) throw ConfigError("td.tol must be positive");
  if (cfg.npg.td.lambda < 0.0) throw ConfigError("td.lambda must be nonnegative");
  if (cfg.npg.sampling.explore_prob < 0.0 || cfg.npg.sampling.explore_prob > 1.0)
    throw ConfigError("sampling.explore_prob must lie in [0, 1]");
  const auto& e = cfg.environment;
  if (e.gamma && !(*e.gamma >= 0.0 && *e.gamma < 1.0)) throw ConfigError("environment.gamma must lie in [0, 1)");
  if (e.explore_low.size() != e.explore_high.size())
    throw ConfigError("environment: explore_low and explore_high differ in length");
  switch (cfg.kind) {
    case ExperimentKind::EvalRate:
      if (cfg.n_grid.size() < 2) throw ConfigError("eval-rate: n_grid needs at least two sizes");
      for (std::size_t n : cfg.n_grid)
        if (n < 2) throw ConfigError("eval-rate: every n must be at least 2");
      break;
    case ExperimentKind::ScheduleSweep:
      if (cfg.exponents.empty()) throw ConfigError("schedule-sweep: exponents must be nonempty");
      for (double a : cfg.exponents)
        if (!(a >= 0.0)) throw ConfigError("schedule-sweep: exponents must be nonnegative");
      break;
    case ExperimentKind::Diagnostics:
      if (cfg.diagnostics.n < 2) throw ConfigError("diagnostics.n must be at least 2");
      break;
    case ExperimentKind::Train: break;
  }
}

std::string to_json_text(const ExperimentConfig& cfg) {
  const auto& e = cfg.environment;
  const auto& c = cfg.npg.schedule;
  const auto& t = cfg.npg.td;
  json j;
  j["experiment"] = to_string(cfg.kind);
  j["output_dir"] = cfg.output_dir;
  j["threads"] = cfg.threads;
  j["seeds"] = cfg.seeds;
  j["n_grid"] = cfg.n_grid;
  j["exponents"] = cfg.exponents;
  json env{{"name", e.name},       {"states", e.states}, {"actions", e.actions},         {"sparsity", e.sparsity},
           {"seed", e.seed},       {"width", e.width},   {"height", e.height},           {"slip", e.slip},
           {"gamma", nullptr},     {"max_steps", e.max_steps}, {"explore_low", e.explore_low},
           {"explore_high", e.explore_high}, {"drift", e.drift}, {"noise", e.noise}};
  if (e.gamma) env["gamma"] = *e.gamma;
  j["environment"] = env;
  j["kernel"] = {{"family", to_string(cfg.kernel.family)},
                 {"coupling", to_string(cfg.kernel.coupling)},
                 {"length_scale", cfg.kernel.length_scale},
                 {"smoothness", cfg.kernel.smoothness}};
  j["schedule"] = {{"regime", to_string(c.regime)},
                   {"step_exponent", c.step_exponent},
                   {"one_minus_cgamma", c.one_minus_cgamma},
                   {"sobolev_m", c.sobolev_m},
                   {"dim_d", c.dim_d},
                   {"tabular_nu", c.tabular_nu},
                   {"gaussian_eps", c.gaussian_eps},
                   {"n_base", c.n_base},
                   {"lambda_base", c.lambda_base},
                   {"n_min", c.n_min},
                   {"n_max", c.n_max},
                   {"norm_proxy_mode", c.norm_proxy_mode == NormProxyMode::Constant ? "constant" : "coefficient_norm"},
                   {"proxy_floor", c.proxy_floor}};
  j["td"] = {{"mode", t.mode == TdMode::ClosedForm ? "closed_form" : "iterative"},
             {"lambda", t.lambda},
             {"eta", t.eta},
             {"alpha", t.alpha},
             {"iters", t.iters},
             {"max_iters", t.max_iters},
             {"tol", t.tol}};
  j["sampling"] = {{"scheme", cfg.npg.sampling.scheme == SamplingScheme::Episodic ? "episodic" : "one_step"},
                   {"explore_prob", cfg.npg.sampling.explore_prob}};
  j["training"] = {{"outer_iters", cfg.npg.outer_iters},
                   {"eval_episodes", cfg.npg.eval_episodes},
                   {"final_eval_episodes", cfg.npg.final_eval_episodes},
                   {"warm_start", cfg.npg.warm_start},
                   {"compaction_every", cfg.npg.compaction_every},
                   {"compaction_points", cfg.npg.compaction_points}};
  j["diagnostics"] = {{"n", cfg.diagnostics.n}, {"oracle_grid", cfg.diagnostics.oracle_grid}};
  return j.dump(2) + "\n";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  auto parse_one = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      throw ConfigError("bad seed list: '" + text + "'");
    return v;
  };
  std::vector<std::uint64_t> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const std::size_t dash = item.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(parse_one(item));
    } else {
      const std::uint64_t lo = parse_one(item.substr(0, dash)), hi = parse_one(item.substr(dash + 1));
      if (hi < lo || hi - lo > 100000) throw ConfigError("bad seed range: '" + std::string(item) + "'");
      for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

namespace {

ExploreBox box_or(const EnvironmentConfig& cfg, ExploreBox dflt) {
  if (cfg.explore_low.empty()) return dflt;
  if (cfg.explore_low.size() != static_cast<std::size_t>(dflt.low.size()))
    throw ConfigError("environment: explore box has the wrong dimension");
  ExploreBox b;
  b.low = Eigen::Map<const Eigen::VectorXd>(cfg.explore_low.data(), dflt.low.size());
  b.high = Eigen::Map<const Eigen::VectorXd>(cfg.explore_high.data(), dflt.low.size());
  return b;
}

}  // namespace

std::unique_ptr<MdpModel> make_environment(const EnvironmentConfig& cfg) {
  if (cfg.name == "tabular_random")
    return std::make_unique<TabularMdp>(
        make_random_tabular(cfg.states, cfg.actions, cfg.gamma.value_or(0.9), cfg.sparsity, cfg.seed));
  if (cfg.name == "gridworld")
    return std::make_unique<TabularMdp>(make_gridworld(cfg.width, cfg.height, cfg.gamma.value_or(0.9), cfg.slip));
  if (cfg.name == "cartpole") {
    CartPoleParams p;
    if (cfg.gamma) p.gamma = *cfg.gamma;
    if (cfg.max_steps > 0) p.max_steps = cfg.max_steps;
    return std::make_unique<CartPole>(p, box_or(cfg, CartPole::default_box()));
  }
  if (cfg.name == "acrobot") {
    AcrobotParams p;
    if (cfg.gamma) p.gamma = *cfg.gamma;
    if (cfg.max_steps > 0) p.max_steps = cfg.max_steps;
    return std::make_unique<Acrobot>(p, box_or(cfg, Acrobot::default_box()));
  }
  if (cfg.name == "smooth_circle") {
    SmoothCircleParams p;
    p.drift = cfg.drift;
    p.noise = cfg.noise;
    if (cfg.gamma) p.gamma = *cfg.gamma;
    return std::make_unique<SmoothCircleMdp>(p);
  }
  throw ConfigError("unknown environment: " + cfg.name);
}

std::unique_ptr<PolicyOracle> make_oracle(const MdpModel& mdp, int grid) {
  if (const auto* t = dynamic_cast<const TabularMdp*>(&mdp)) return std::make_unique<TabularOracle>(*t);
  if (const auto* c = dynamic_cast<const SmoothCircleMdp*>(&mdp))
    return std::make_unique<SmoothCircleOracle>(*c, grid, 512);
  return nullptr;
}

}  // namespace knpg::harness

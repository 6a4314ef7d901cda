#include "knpg/policy.hpp"

#include <cmath>

#include "knpg/error.hpp"

namespace knpg {

// Anchors of F merged across terms, grouped by discrete action.
struct FlatExpansion {
  std::shared_ptr<const Kernel> kernel;
  // Tabular kernels: one weight per distinct (state, action).
  std::unordered_map<PointKey, double, PointKeyHash> table;
  // Radial kernels: per action, column-major states and weights.
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> weights;
  std::vector<std::unordered_map<PointKey, std::size_t, PointKeyHash>> index;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

SoftmaxPolicy::SoftmaxPolicy(int num_actions, int state_dim, int action_dim)
    : num_actions_(num_actions),
      state_dim_(state_dim),
      action_dim_(action_dim),
      terms_(std::make_shared<const std::vector<Term>>()),
      flat_(std::make_shared<const FlatExpansion>()) {
  if (action_dim == 0 && num_actions < 1) throw ConfigError("policy: need at least one action");
  if (state_dim < 1) throw ConfigError("policy: state dimension must be positive");
}

std::size_t SoftmaxPolicy::expansion_size() const {
  if (flat_->kernel && flat_->kernel->is_tabular()) return flat_->table.size();
  std::size_t n = 0;
  for (const auto& w : flat_->weights) n += w.size();
  return n;
}

SoftmaxPolicy SoftmaxPolicy::with_term(double delta, std::shared_ptr<const QEstimate> f) const {
  if (!f) throw ConfigError("npg_step: null estimate");
  if (delta < 0.0) throw ConfigError("npg_step: step size must be nonnegative");
  if (f->anchors().state_dim() != state_dim_ || f->anchors().action_dim() != action_dim_)
    throw ConfigError("npg_step: estimate layout does not match the policy");
  if (flat_->kernel && !(flat_->kernel->spec() == f->kernel().spec()))
    throw ConfigError("npg_step: all terms must share one kernel");

  SoftmaxPolicy out = *this;
  auto terms = std::make_shared<std::vector<Term>>(*terms_);
  terms->push_back({delta, f});
  out.terms_ = std::move(terms);

  if (action_dim_ > 0) return out;  // continuous actions: no flattened evaluator

  auto flat = std::make_shared<FlatExpansion>(*flat_);
  flat->kernel = f->kernel_ptr();
  const PointSet& A = f->anchors();
  const Eigen::VectorXd& b = f->coeffs();
  if (flat->kernel->is_tabular()) {
    for (std::size_t i = 0; i < A.size(); ++i) {
      if (b[i] == 0.0) continue;
      flat->table[make_key(A, i)] += delta * b[i];
    }
  } else {
    flat->states.resize(num_actions_);
    flat->weights.resize(num_actions_);
    flat->index.resize(num_actions_);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const int a = A.action(i);
      if (a < 0 || a >= num_actions_) throw ConfigError("npg_step: anchor action out of range");
      if (b[i] == 0.0) continue;
      PointKey key = make_key(A, i);
      auto [it, inserted] = flat->index[a].try_emplace(std::move(key), flat->weights[a].size());
      if (inserted) {
        flat->states[a].insert(flat->states[a].end(), A.state_ptr(i), A.state_ptr(i) + state_dim_);
        flat->weights[a].push_back(delta * b[i]);
      } else {
        flat->weights[a][it->second] += delta * b[i];
      }
    }
  }
  out.flat_ = std::move(flat);
  return out;
}

void SoftmaxPolicy::check_state_dim(const Eigen::VectorXd& s) const {
  if (s.size() != state_dim_) throw ConfigError("policy: state dimension mismatch");
}

Eigen::VectorXd SoftmaxPolicy::logits(const double* s) const {
  if (action_dim_ > 0) throw UnsupportedError("policy: continuous action spaces are not supported");
  Eigen::VectorXd F = Eigen::VectorXd::Zero(num_actions_);
  const FlatExpansion& fx = *flat_;
  if (!fx.kernel) return F;
  const Kernel& K = *fx.kernel;

  if (K.is_tabular()) {
    PointKey key;
    key.coords.assign(s, s + state_dim_);
    for (int a = 0; a < num_actions_; ++a) {
      key.action = a;
      auto it = fx.table.find(key);
      if (it != fx.table.end()) F[a] = it->second;
    }
    return F;
  }

  const Eigen::Map<const Eigen::VectorXd> sv(s, state_dim_);
  const double l = K.spec().length_scale;
  const bool joint = K.spec().coupling == ActionCoupling::JointKernel;
  for (int g = 0; g < static_cast<int>(fx.weights.size()); ++g) {
    const auto m = static_cast<Eigen::Index>(fx.weights[g].size());
    if (m == 0) continue;
    const Eigen::Map<const Eigen::MatrixXd> S(fx.states[g].data(), state_dim_, m);
    const Eigen::Map<const Eigen::VectorXd> w(fx.weights[g].data(), m);
    const Eigen::ArrayXd sq = (S.colwise() - sv).colwise().squaredNorm().transpose().array();
    auto profile = [&](const Eigen::ArrayXd& d2) -> Eigen::ArrayXd {
      switch (K.spec().family) {
        case KernelFamily::GaussianRBF: return (-d2 / (l * l)).exp();
        case KernelFamily::LaplaceNTK: return (-d2.sqrt() / l).exp();
        default: return d2.unaryExpr([&](double x) { return K.radial(x); });
      }
    };
    if (!joint) {
      F[g] += (profile(sq) * w.array()).sum();
    } else {
      for (int a = 0; a < num_actions_; ++a) {
        const double da = static_cast<double>(a - g);
        F[a] += (profile(sq + da * da) * w.array()).sum();
      }
    }
  }
  return F;
}

Eigen::VectorXd SoftmaxPolicy::action_distribution(const double* s) const { return softmax(logits(s)); }

int SoftmaxPolicy::sample_action(const double* s, CounterRng& rng) const {
  const Eigen::VectorXd p = action_distribution(s);
  const double u = rng.uniform();
  double c = 0.0;
  for (int a = 0; a < num_actions_; ++a) {
    c += p[a];
    if (u < c) return a;
  }
  return num_actions_ - 1;
}

double SoftmaxPolicy::norm_proxy(NormProxyMode mode) const {
  if (mode == NormProxyMode::Constant) return 1.0;
  double s = 0.0;
  for (const Term& t : *terms_) s += t.delta * t.delta * t.f->rkhs_norm_sq();
  return std::sqrt(s);
}

SoftmaxPolicy SoftmaxPolicy::compacted(const PointSet& dictionary, double jitter) const {
  if (action_dim_ > 0) throw UnsupportedError("compaction: continuous action spaces are not supported");
  if (!flat_->kernel || flat_->kernel->is_tabular()) return *this;
  const Kernel& K = *flat_->kernel;
  if (K.spec().coupling != ActionCoupling::DeltaOnAction)
    throw UnsupportedError("compaction: only the action-delta coupling is supported");
  K.check_compatible(dictionary);

  auto flat = std::make_shared<FlatExpansion>();
  flat->kernel = flat_->kernel;
  flat->states.resize(num_actions_);
  flat->weights.resize(num_actions_);
  flat->index.resize(num_actions_);
  for (int a = 0; a < num_actions_; ++a) {
    PointSet D(state_dim_);
    for (std::size_t i = 0; i < dictionary.size(); ++i)
      if (dictionary.action(i) == a) D.push_back(dictionary.state_ptr(i), a);
    if (D.empty()) continue;
    Eigen::VectorXd y(D.size());
    for (std::size_t i = 0; i < D.size(); ++i) y[i] = logits(D.state_ptr(i))[a];
    Eigen::MatrixXd G = K.gram(D);
    G.diagonal().array() += jitter;
    const Eigen::VectorXd w = G.ldlt().solve(y);
    if (!w.allFinite()) throw NumericalError("compaction: interpolation system is singular");
    for (std::size_t i = 0; i < D.size(); ++i) {
      flat->index[a].emplace(make_key(D, i), i);
      flat->states[a].insert(flat->states[a].end(), D.state_ptr(i), D.state_ptr(i) + state_dim_);
      flat->weights[a].push_back(w[i]);
    }
  }
  SoftmaxPolicy out = *this;
  out.flat_ = std::move(flat);
  return out;
}

}  // namespace knpg

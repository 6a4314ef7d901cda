#include "knpg/kernels.hpp"

#include <cmath>

#include "knpg/error.hpp"

namespace knpg {

void PointSet::reserve(std::size_t n) {
  states_.reserve(n * state_dim_);
  actions_.reserve(n);
  action_vecs_.reserve(n * action_dim_);
}

void PointSet::push_back(const StateAction& p) {
  if (p.state.size() != state_dim_) throw ConfigError("PointSet: state dimension mismatch");
  if (action_dim_ > 0 && p.action_vec.size() != action_dim_)
    throw ConfigError("PointSet: action dimension mismatch");
  states_.insert(states_.end(), p.state.data(), p.state.data() + state_dim_);
  actions_.push_back(p.action);
  if (action_dim_ > 0)
    action_vecs_.insert(action_vecs_.end(), p.action_vec.data(), p.action_vec.data() + action_dim_);
}

void PointSet::push_back(const double* state, int action) {
  if (action_dim_ > 0) throw ConfigError("PointSet: continuous actions need an action vector");
  states_.insert(states_.end(), state, state + state_dim_);
  actions_.push_back(action);
}

StateAction PointSet::point(std::size_t i) const {
  StateAction p;
  p.state = Eigen::Map<const Eigen::VectorXd>(state_ptr(i), state_dim_);
  p.action = actions_[i];
  if (action_dim_ > 0) p.action_vec = Eigen::Map<const Eigen::VectorXd>(action_ptr(i), action_dim_);
  return p;
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "tabular" || name == "TabularDelta") return KernelFamily::TabularDelta;
  if (name == "gaussian" || name == "GaussianRBF") return KernelFamily::GaussianRBF;
  if (name == "laplace" || name == "ntk" || name == "LaplaceNTK") return KernelFamily::LaplaceNTK;
  if (name == "sobolev" || name == "matern" || name == "SobolevMatern")
    return KernelFamily::SobolevMatern;
  throw ConfigError("unknown kernel family: " + name);
}

ActionCoupling parse_action_coupling(const std::string& name) {
  if (name == "delta_on_action" || name == "DeltaOnAction") return ActionCoupling::DeltaOnAction;
  if (name == "joint" || name == "JointKernel") return ActionCoupling::JointKernel;
  throw ConfigError("unknown action coupling: " + name);
}

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::TabularDelta: return "tabular";
    case KernelFamily::GaussianRBF: return "gaussian";
    case KernelFamily::LaplaceNTK: return "laplace";
    case KernelFamily::SobolevMatern: return "sobolev";
  }
  return "unknown";
}

std::string to_string(ActionCoupling c) {
  return c == ActionCoupling::DeltaOnAction ? "delta_on_action" : "joint";
}

Kernel::Kernel(KernelSpec spec, int state_dim, int action_dim)
    : spec_(spec), state_dim_(state_dim), action_dim_(action_dim) {
  if (state_dim < 1) throw ConfigError("kernel: state dimension must be positive");
  if (action_dim < 0) throw ConfigError("kernel: negative action dimension");
  if (spec_.family != KernelFamily::TabularDelta && !(spec_.length_scale > 0.0))
    throw ConfigError("kernel: length_scale must be positive");
  if (spec_.family == KernelFamily::SobolevMatern) {
    if (!(spec_.smoothness > 0.0)) throw ConfigError("kernel: sobolev smoothness m must be positive");
    int d = state_dim_;
    if (spec_.coupling == ActionCoupling::JointKernel) d += action_dim_ > 0 ? action_dim_ : 1;
    nu_ = spec_.smoothness - 0.5 * d;
    if (!(nu_ > 0.0))
      throw ConfigError("kernel: sobolev order m must exceed d/2 (got nu = m - d/2 <= 0)");
    matern_scale_ = std::pow(2.0, 1.0 - nu_) / std::tgamma(nu_);
  }

  // Probe the diagonal. Every supported profile has K(w, w) = 1.
  k_max_ = 0.0;
  for (int probe = 0; probe < 4; ++probe) {
    StateAction p;
    p.state = Eigen::VectorXd::Constant(state_dim_, probe * 0.37 - 0.5);
    if (action_dim_ > 0) {
      p.action_vec = Eigen::VectorXd::Constant(action_dim_, 0.25 * probe);
    } else {
      p.action = probe % 2;
    }
    double v = (*this)(p, p);
    if (!std::isfinite(v)) throw ConfigError("kernel: non-finite diagonal value");
    k_max_ = std::max(k_max_, v);
  }
  if (k_max_ > 1.0 + 1e-12) throw ConfigError("kernel: diagonal exceeds the normalized bound");
}

double Kernel::radial(double sq) const {
  const double l = spec_.length_scale;
  switch (spec_.family) {
    case KernelFamily::GaussianRBF: return std::exp(-sq / (l * l));
    case KernelFamily::LaplaceNTK: return std::exp(-std::sqrt(sq) / l);
    case KernelFamily::SobolevMatern: {
      const double r = std::sqrt(sq) / l;
      if (nu_ == 0.5) return std::exp(-r);
      if (nu_ == 1.5) {
        const double x = std::sqrt(3.0) * r;
        return (1.0 + x) * std::exp(-x);
      }
      if (nu_ == 2.5) {
        const double x = std::sqrt(5.0) * r;
        return (1.0 + x + x * x / 3.0) * std::exp(-x);
      }
      const double x = std::sqrt(2.0 * nu_) * r;
      if (x == 0.0) return 1.0;
      if (x > 700.0) return 0.0;
      return matern_scale_ * std::pow(x, nu_) * std::cyl_bessel_k(nu_, x);
    }
    case KernelFamily::TabularDelta: return sq == 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

double Kernel::eval_raw(const double* s1, int a1, const double* av1, const double* s2, int a2,
                        const double* av2) const {
  if (spec_.family == KernelFamily::TabularDelta) {
    for (int k = 0; k < state_dim_; ++k)
      if (s1[k] != s2[k]) return 0.0;
    if (action_dim_ == 0) return a1 == a2 ? 1.0 : 0.0;
    for (int k = 0; k < action_dim_; ++k)
      if (av1[k] != av2[k]) return 0.0;
    return 1.0;
  }
  double sq = 0.0;
  for (int k = 0; k < state_dim_; ++k) {
    const double d = s1[k] - s2[k];
    sq += d * d;
  }
  if (spec_.coupling == ActionCoupling::DeltaOnAction) {
    if (action_dim_ == 0) {
      if (a1 != a2) return 0.0;
    } else {
      for (int k = 0; k < action_dim_; ++k)
        if (av1[k] != av2[k]) return 0.0;
    }
  } else if (action_dim_ == 0) {
    const double d = static_cast<double>(a1 - a2);
    sq += d * d;
  } else {
    for (int k = 0; k < action_dim_; ++k) {
      const double d = av1[k] - av2[k];
      sq += d * d;
    }
  }
  return radial(sq);
}

void Kernel::check_point(const StateAction& p) const {
  if (p.state.size() != state_dim_) throw ConfigError("kernel: state dimension mismatch");
  if (action_dim_ == 0) {
    if (p.action < 0) throw ConfigError("kernel: missing discrete action");
  } else if (p.action_vec.size() != action_dim_) {
    throw ConfigError("kernel: action dimension mismatch");
  }
}

void Kernel::check_compatible(const PointSet& ps) const {
  if (ps.state_dim() != state_dim_ || ps.action_dim() != action_dim_)
    throw ConfigError("kernel: point set layout does not match the kernel");
}

double Kernel::operator()(const StateAction& a, const StateAction& b) const {
  check_point(a);
  check_point(b);
  return eval_raw(a.state.data(), a.action, a.action_vec.data(), b.state.data(), b.action,
                  b.action_vec.data());
}

double Kernel::eval(const PointSet& ps, std::size_t i, const PointSet& qs, std::size_t j) const {
  return eval_raw(ps.state_ptr(i), ps.action(i), action_dim_ ? ps.action_ptr(i) : nullptr,
                  qs.state_ptr(j), qs.action(j), action_dim_ ? qs.action_ptr(j) : nullptr);
}

Eigen::MatrixXd Kernel::gram(const PointSet& pts) const {
  check_compatible(pts);
  if (pts.empty()) throw ConfigError("gram: empty point list");
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd g(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) g(i, j) = eval(pts, i, pts, j);
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) g(i, j) = g(j, i);
  return g;
}

Eigen::MatrixXd Kernel::gram(const PointSet& rows, const PointSet& cols) const {
  check_compatible(rows);
  check_compatible(cols);
  if (rows.empty() || cols.empty()) throw ConfigError("gram: empty point list");
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd g(m, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) g(i, j) = eval(rows, i, cols, j);
  return g;
}

}  // namespace knpg

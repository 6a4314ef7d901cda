#include "knpg/q_estimate.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "knpg/error.hpp"

namespace knpg {

std::size_t PointKeyHash::operator()(const PointKey& k) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(k.action + 1);
  for (double c : k.coords) {
    // +0.0 and -0.0 compare equal, so hash them alike.
    const std::uint64_t bits = c == 0.0 ? 0 : std::bit_cast<std::uint64_t>(c);
    h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

PointKey make_key(const PointSet& ps, std::size_t i) {
  PointKey k;
  k.coords.assign(ps.state_ptr(i), ps.state_ptr(i) + ps.state_dim());
  if (ps.action_dim() > 0) k.coords.insert(k.coords.end(), ps.action_ptr(i), ps.action_ptr(i) + ps.action_dim());
  k.action = ps.action(i);
  return k;
}

PointKey make_key(const StateAction& p) {
  PointKey k;
  k.coords.assign(p.state.data(), p.state.data() + p.state.size());
  k.coords.insert(k.coords.end(), p.action_vec.data(), p.action_vec.data() + p.action_vec.size());
  k.action = p.action;
  return k;
}

QEstimate::QEstimate(std::shared_ptr<const Kernel> kernel, std::shared_ptr<const PointSet> anchors,
                     Eigen::VectorXd coeffs, std::optional<double> rkhs_norm_sq)
    : kernel_(std::move(kernel)), anchors_(std::move(anchors)), coeffs_(std::move(coeffs)) {
  if (!kernel_ || !anchors_) throw ConfigError("QEstimate: null kernel or anchors");
  if (static_cast<std::size_t>(coeffs_.size()) != anchors_->size())
    throw ConfigError("QEstimate: coefficient count does not match anchors");
  if (!anchors_->empty()) kernel_->check_compatible(*anchors_);

  if (kernel_->is_tabular()) {
    for (std::size_t i = 0; i < anchors_->size(); ++i) table_[make_key(*anchors_, i)] += coeffs_[i];
    if (!rkhs_norm_sq) {
      // Distinct delta anchors are orthonormal.
      double s = 0.0;
      for (const auto& [key, v] : table_) s += v * v;
      rkhs_norm_sq = s;
    }
  }
  if (!rkhs_norm_sq) {
    if (anchors_->empty()) {
      rkhs_norm_sq = 0.0;
    } else {
      rkhs_norm_sq = coeffs_.dot(kernel_->gram(*anchors_) * coeffs_);
    }
  }
  const double scale = coeffs_.squaredNorm() * kernel_->k_max() * std::max<double>(1.0, static_cast<double>(coeffs_.size()));
  if (*rkhs_norm_sq < -1e-10 * std::max(1.0, scale))
    throw NumericalError("QEstimate: negative RKHS norm, Gram matrix is not PSD");
  norm_sq_ = std::max(0.0, *rkhs_norm_sq);
}

double QEstimate::eval_point(const double* s, int a, const double* av) const {
  const PointSet& A = *anchors_;
  if (kernel_->is_tabular()) {
    PointKey k;
    k.coords.assign(s, s + A.state_dim());
    if (A.action_dim() > 0) k.coords.insert(k.coords.end(), av, av + A.action_dim());
    k.action = a;
    auto it = table_.find(k);
    return it == table_.end() ? 0.0 : it->second;
  }
  const bool cont = A.action_dim() > 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i)
    acc += coeffs_[i] * kernel_->eval_raw(A.state_ptr(i), A.action(i), cont ? A.action_ptr(i) : nullptr, s, a, av);
  return acc;
}

double QEstimate::operator()(const StateAction& w) const {
  if (w.state.size() != anchors_->state_dim()) throw ConfigError("QEstimate: state dimension mismatch");
  return eval_point(w.state.data(), w.action, w.action_vec.data());
}

double QEstimate::eval(const PointSet& ps, std::size_t i) const {
  return eval_point(ps.state_ptr(i), ps.action(i), ps.action_dim() ? ps.action_ptr(i) : nullptr);
}

Eigen::VectorXd QEstimate::evaluate(const PointSet& ps) const {
  const auto m = static_cast<Eigen::Index>(ps.size());
  Eigen::VectorXd out(m);
  if (kernel_->is_tabular() || anchors_->empty()) {
    for (Eigen::Index i = 0; i < m; ++i) out[i] = anchors_->empty() ? 0.0 : eval(ps, i);
    return out;
  }
  kernel_->check_compatible(ps);
  const PointSet& A = *anchors_;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < A.size(); ++j) acc += coeffs_[j] * kernel_->eval(A, j, ps, i);
    out[i] = acc;
  }
  return out;
}

double QEstimate::inner(const QEstimate& other) const {
  if (!(kernel_->spec() == other.kernel_->spec()))
    throw ConfigError("QEstimate::inner: kernels differ");
  if (anchors_->empty() || other.anchors_->empty()) return 0.0;
  if (kernel_->is_tabular()) {
    double s = 0.0;
    for (const auto& [key, v] : table_) {
      auto it = other.table_.find(key);
      if (it != other.table_.end()) s += v * it->second;
    }
    return s;
  }
  return coeffs_.dot(kernel_->gram(*anchors_, *other.anchors_) * other.coeffs_);
}

}  // namespace knpg

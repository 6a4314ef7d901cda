#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "knpg/kernels.hpp"

namespace knpg {

// Bitwise key of a point, used to merge exactly duplicated anchors.
struct PointKey {
  std::vector<double> coords;  // state, then action vector if continuous
  int action = -1;

  bool operator==(const PointKey&) const = default;
};

struct PointKeyHash {
  std::size_t operator()(const PointKey& k) const noexcept;
};

PointKey make_key(const PointSet& ps, std::size_t i);
PointKey make_key(const StateAction& p);

// f = sum_i b_i K(anchor_i, .)
class QEstimate {
 public:
  QEstimate(std::shared_ptr<const Kernel> kernel, std::shared_ptr<const PointSet> anchors,
            Eigen::VectorXd coeffs, std::optional<double> rkhs_norm_sq = std::nullopt);

  const Kernel& kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  const PointSet& anchors() const { return *anchors_; }
  std::shared_ptr<const PointSet> anchors_ptr() const { return anchors_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  std::size_t size() const { return anchors_->size(); }

  double operator()(const StateAction& w) const;
  double eval(const PointSet& ps, std::size_t i) const;
  Eigen::VectorXd evaluate(const PointSet& ps) const;

  // b^T K b, clamped at zero after the PSD guard.
  double rkhs_norm_sq() const { return norm_sq_; }
  // <this, other>_H by coefficient algebra.
  double inner(const QEstimate& other) const;

 private:
  double eval_point(const double* s, int a, const double* av) const;

  std::shared_ptr<const Kernel> kernel_;
  std::shared_ptr<const PointSet> anchors_;
  Eigen::VectorXd coeffs_;
  double norm_sq_ = 0.0;
  // Tabular kernels: merged coefficient per distinct anchor.
  std::unordered_map<PointKey, double, PointKeyHash> table_;
};

}  // namespace knpg

#include "knpg/evaluation.hpp"

#include <climits>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "knpg/error.hpp"

namespace knpg {

namespace {

constexpr double kMaxCondition = 1e14;
constexpr double kResidualTol = 1e-10;

// Exact-duplicate classes of a batch under a delta kernel.
struct TabularLayout {
  int U = 0;
  std::vector<int> c0;  // class of w0_i
  std::vector<int> c1;  // class of w1_i, -1 when w1 is not an anchor or the row is terminal
  Eigen::VectorXd d;    // class sizes
  Eigen::VectorXd R;    // reward sums per class
  Eigen::MatrixXd N;    // N(u, v) = #{i in u : w1_i in v}
};

TabularLayout tabular_layout(const SampleBatch& batch) {
  TabularLayout L;
  const std::size_t n = batch.size();
  std::unordered_map<PointKey, int, PointKeyHash> classes;
  L.c0.resize(n);
  L.c1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = classes.try_emplace(make_key(batch.omega0, i), L.U);
    if (inserted) ++L.U;
    L.c0[i] = it->second;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.terminal[i]) {
      L.c1[i] = -1;
      continue;
    }
    auto it = classes.find(make_key(batch.omega1, i));
    L.c1[i] = it == classes.end() ? -1 : it->second;
  }
  L.d = Eigen::VectorXd::Zero(L.U);
  L.R = Eigen::VectorXd::Zero(L.U);
  L.N = Eigen::MatrixXd::Zero(L.U, L.U);
  for (std::size_t i = 0; i < n; ++i) {
    L.d[L.c0[i]] += 1.0;
    L.R[L.c0[i]] += batch.rewards[static_cast<Eigen::Index>(i)];
    if (L.c1[i] >= 0) L.N(L.c0[i], L.c1[i]) += 1.0;
  }
  return L;
}

Eigen::VectorXd class_sums(const TabularLayout& L, const Eigen::VectorXd& b) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(L.U);
  for (std::size_t i = 0; i < L.c0.size(); ++i) g[L.c0[i]] += b[static_cast<Eigen::Index>(i)];
  return g;
}

// Residual of the full n x n system evaluated in O(n).
double tabular_residual(const TabularLayout& L, const SampleBatch& batch, const Eigen::VectorXd& b,
                        double lambda, double gamma) {
  const double ln = lambda * static_cast<double>(batch.size());
  const Eigen::VectorXd g = class_sums(L, b);
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double next = L.c1[i] >= 0 ? g[L.c1[i]] : 0.0;
    const double res = g[L.c0[i]] + ln * b[ii] - gamma * next - batch.rewards[ii];
    s += res * res;
  }
  return std::sqrt(s);
}

double tabular_radius(const TabularLayout& L, std::size_t n, double eta, double alpha, double gamma) {
  Eigen::MatrixXd G = -eta * (Eigen::MatrixXd(L.d.asDiagonal()) - gamma * L.N);
  G.diagonal().array() += 1.0 - alpha;
  double rho = Eigen::EigenSolver<Eigen::MatrixXd>(G, false).eigenvalues().cwiseAbs().maxCoeff();
  if (static_cast<int>(n) > L.U) rho = std::max(rho, std::abs(1.0 - alpha));
  return rho;
}

std::shared_ptr<const PointSet> copy_anchors(const SampleBatch& batch) {
  return std::make_shared<const PointSet>(batch.omega0);
}

void check_batch(const SampleBatch& batch, const Kernel& kernel, double gamma) {
  if (batch.size() < 1) throw ConfigError("TD: empty batch");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("TD: discount must lie in [0, 1)");
  kernel.check_compatible(batch.omega0);
  kernel.check_compatible(batch.omega1);
}

}  // namespace

QFunction as_function(std::shared_ptr<const QEstimate> q) {
  return [q](const PointSet& ps) { return q->evaluate(ps); };
}

TdSystem build_td_system(const SampleBatch& batch, const Kernel& kernel) {
  TdSystem sys;
  sys.K = kernel.gram(batch.omega0);
  sys.C = kernel.gram(batch.omega1, batch.omega0);
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (batch.terminal[i]) sys.C.row(static_cast<Eigen::Index>(i)).setZero();
  sys.r = batch.rewards;
  return sys;
}

ClosedFormResult krr_td_closed_form(const SampleBatch& batch, std::shared_ptr<const Kernel> kernel, double lambda,
                                    double gamma) {
  if (!kernel) throw ConfigError("closed form: null kernel");
  check_batch(batch, *kernel, gamma);
  if (!(lambda >= 0.0)) throw ConfigError("closed form: lambda must be nonnegative");
  const std::size_t n = batch.size();
  const double ln = lambda * static_cast<double>(n);
  const double rnorm = batch.rewards.norm();
  const double rscale = rnorm > 0.0 ? rnorm : 1.0;
  ClosedFormResult out;

  if (kernel->is_tabular()) {
    out.tabular_path = true;
    const TabularLayout L = tabular_layout(batch);
    if (lambda == 0.0 && L.U < static_cast<int>(n))
      throw NumericalError("closed form: system is singular (repeated anchors with lambda = 0); use lambda > 0");
    Eigen::MatrixXd A = -gamma * L.N;
    A.diagonal() += L.d + Eigen::VectorXd::Constant(L.U, ln);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    double cond = 1.0 / lu.rcond();
    if (lambda > 0.0) cond = std::max(cond, (ln + L.d.maxCoeff() * (1.0 + gamma)) / ln);
    out.condition_estimate = cond;
    if (!(cond <= kMaxCondition))
      throw NumericalError("closed form: condition estimate " + format_double(cond) +
                           " exceeds 1e14; increase lambda");
    Eigen::VectorXd g = lu.solve(L.R);
    g += lu.solve(L.R - A * g);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (lambda == 0.0) {
        b[ii] = g[L.c0[i]];
      } else {
        const double next = L.c1[i] >= 0 ? g[L.c1[i]] : 0.0;
        b[ii] = (batch.rewards[ii] - g[L.c0[i]] + gamma * next) / ln;
      }
    }
    out.relative_residual = tabular_residual(L, batch, b, lambda, gamma) / rscale;
    if (!(out.relative_residual <= kResidualTol))
      throw NumericalError("closed form: residual " + format_double(out.relative_residual) +
                           " exceeds 1e-10; increase lambda");
    out.q = std::make_shared<const QEstimate>(kernel, copy_anchors(batch), std::move(b));
    return out;
  }

  const TdSystem sys = build_td_system(batch, *kernel);
  Eigen::MatrixXd A = sys.K - gamma * sys.C;
  A.diagonal().array() += ln;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  out.condition_estimate = 1.0 / lu.rcond();
  if (!(out.condition_estimate <= kMaxCondition))
    throw NumericalError("closed form: condition estimate " + format_double(out.condition_estimate) +
                         " exceeds 1e14; increase lambda");
  Eigen::VectorXd b = lu.solve(sys.r);
  if (!b.allFinite()) {
    // Diagonal jitter fallback. The residual check below is still against the original system.
    out.jitter = 1e-10 * A.trace() / static_cast<double>(n);
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += out.jitter;
    lu.compute(Aj);
    b = lu.solve(sys.r);
  }
  b += lu.solve(sys.r - A * b);
  out.relative_residual = (A * b - sys.r).norm() / rscale;
  if (!(out.relative_residual <= kResidualTol))
    throw NumericalError("closed form: residual " + format_double(out.relative_residual) +
                         " exceeds 1e-10; increase lambda");
  const double norm_sq = b.dot(sys.K * b);
  out.q = std::make_shared<const QEstimate>(kernel, copy_anchors(batch), std::move(b), norm_sq);
  return out;
}

TdMode parse_td_mode(const std::string& name) {
  if (name == "closed_form") return TdMode::ClosedForm;
  if (name == "iterative") return TdMode::Iterative;
  throw ConfigError("unknown TD mode: " + name);
}

Eigen::MatrixXd iteration_matrix(const Eigen::MatrixXd& K, const Eigen::MatrixXd& C, double eta, double alpha,
                                 double gamma) {
  Eigen::MatrixXd G = -eta * K + eta * gamma * C;
  G.diagonal().array() += 1.0 - alpha;
  return G;
}

double power_spectral_radius(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec, Eigen::Index n,
                             int iters, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.uniform() - 0.5;
  x.normalize();
  double acc = 0.0;
  int count = 0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd y = matvec(x);
    const double nrm = y.norm();
    if (!(nrm > 0.0)) return 0.0;
    if (!std::isfinite(nrm)) return std::numeric_limits<double>::infinity();
    if (k >= iters / 2) {
      acc += std::log(nrm);
      ++count;
    }
    x = y / nrm;
  }
  return std::exp(acc / count);
}

StepSize auto_step_size(const Eigen::MatrixXd& K, const Eigen::MatrixXd& C, double lambda, std::size_t n,
                        double gamma) {
  if (K.rows() != static_cast<Eigen::Index>(n) || C.rows() != K.rows() || C.cols() != K.cols())
    throw ConfigError("auto_step_size: matrix shapes do not match n");
  const double kmax = std::max(K.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  StepSize st;
  st.eta = (1.0 - kStepC1) / (static_cast<double>(n) * (1.0 + gamma) * kmax + lambda);
  for (;; ++st.halvings) {
    st.alpha = st.eta * lambda * static_cast<double>(n);
    const double eta = st.eta, alpha = st.alpha;
    st.spectral_radius = power_spectral_radius(
        [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
          return (1.0 - alpha) * x - eta * (K * x) + eta * gamma * (C * x);
        },
        K.rows());
    st.stable = st.spectral_radius < 1.0;
    if (st.stable || st.halvings >= 60) break;
    st.eta *= 0.5;
  }
  return st;
}

int td_iteration_count(double tol, double lambda, std::size_t n, double dist_b, double rho) {
  if (!(dist_b > 0.0)) return 0;
  if (!(rho > 0.0)) return 1;
  if (!(rho < 1.0)) return INT_MAX;
  const double arg = tol * lambda / (static_cast<double>(n) * dist_b * dist_b);
  if (!(arg > 0.0)) return INT_MAX;
  const double t = std::log(arg) / std::log(rho);
  if (t <= 0.0) return 0;
  if (t >= static_cast<double>(INT_MAX)) return INT_MAX;
  return static_cast<int>(std::ceil(t));
}

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace) {
  os << "iteration,step_change,coeff_norm,error\n";
  for (const TraceRow& r : trace.rows)
    os << r.iter << ',' << format_double(r.step_change) << ',' << format_double(r.coeff_norm) << ','
       << format_double(r.error) << '\n';
}

namespace {

IterateResult iterate_tabular(const SampleBatch& batch, std::shared_ptr<const Kernel> kernel, double gamma,
                              const TdSolverConfig& cfg, std::shared_ptr<const QEstimate> init,
                              const Eigen::VectorXd* reference) {
  const std::size_t n = batch.size();
  const double nd = static_cast<double>(n);
  const TabularLayout L = tabular_layout(batch);
  const double lambda = cfg.lambda;

  double eta, alpha;
  IterateResult out;
  if (cfg.eta <= 0.0) {
    eta = (1.0 - kStepC1) / (nd * (1.0 + gamma) * kernel->k_max() + lambda);
    int halvings = 0;
    for (;; ++halvings) {
      alpha = eta * lambda * nd;
      out.trace.spectral_radius = tabular_radius(L, n, eta, alpha, gamma);
      if (out.trace.spectral_radius < 1.0 || halvings >= 60) break;
      eta *= 0.5;
    }
  } else {
    eta = cfg.eta;
    alpha = cfg.alpha >= 0.0 ? cfg.alpha : eta * lambda * nd;
    out.trace.spectral_radius = tabular_radius(L, n, eta, alpha, gamma);
  }
  out.trace.eta = eta;
  out.trace.alpha = alpha;

  // Warm-start contribution, decaying as (1 - alpha)^t.
  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(L.U), W = Eigen::VectorXd::Zero(L.U);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (init) {
    const Eigen::VectorXd u0 = init->evaluate(batch.omega0);
    const Eigen::VectorXd u1 = init->evaluate(batch.omega1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      v0[L.c0[i]] = u0[ii];
      const double w = batch.terminal[i] ? 0.0 : u1[ii];
      W[L.c0[i]] += w;
      z[ii] = u0[ii] - gamma * w;
    }
  }
  const Eigen::VectorXd init_force = L.d.cwiseProduct(v0) - gamma * W;

  Eigen::VectorXd gref;
  if (reference) gref = class_sums(L, *reference);

  // Reward range per (c0, c1) group for the exact max-norm stopping test.
  const int groups_w = L.U + 1;
  std::vector<double> rmin(static_cast<std::size_t>(L.U) * groups_w, std::numeric_limits<double>::infinity());
  std::vector<double> rmax(rmin.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t gidx = static_cast<std::size_t>(L.c0[i]) * groups_w + (L.c1[i] + 1);
    const double r = batch.rewards[static_cast<Eigen::Index>(i)];
    rmin[gidx] = std::min(rmin[gidx], r);
    rmax[gidx] = std::max(rmax[gidx], r);
  }

  Eigen::MatrixXd M = -gamma * L.N;
  M.diagonal() += L.d;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(L.U), H = Eigen::VectorXd::Zero(L.U);
  double S = 0.0, ct = 1.0;
  auto b_at = [&](std::size_t i, const Eigen::VectorXd& Hc, double Sc, int t) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double h1 = L.c1[i] >= 0 ? Hc[L.c1[i]] : 0.0;
    const double decay = t > 0 ? static_cast<double>(t) * std::pow(1.0 - alpha, t - 1) : 0.0;
    return -eta * (Hc[L.c0[i]] - gamma * h1 - batch.rewards[ii] * Sc + decay * z[ii]);
  };

  const int limit = cfg.iters > 0 ? cfg.iters : cfg.max_iters;
  std::vector<double> norm_hist;
  int t = 0;
  for (; t < limit; ++t) {
    const Eigen::VectorXd resid = M * g + ct * init_force - L.R;
    const Eigen::VectorXd g_new = (1.0 - alpha) * g - eta * resid;
    const Eigen::VectorXd H_new = (1.0 - alpha) * H + g;
    const double S_new = (1.0 - alpha) * S + 1.0;
    const double ct_new = ct * (1.0 - alpha);

    double db = 0.0;
    if (!init) {
      for (int u = 0; u < L.U; ++u)
        for (int v = -1; v < L.U; ++v) {
          const std::size_t gidx = static_cast<std::size_t>(u) * groups_w + (v + 1);
          if (rmin[gidx] > rmax[gidx]) continue;
          const double h1 = v >= 0 ? H[v] : 0.0, g1 = v >= 0 ? g[v] : 0.0;
          const double base = eta * (alpha * (H[u] - gamma * h1) - (g[u] - gamma * g1));
          const double slope = eta * (1.0 - alpha * S);
          db = std::max({db, std::abs(base + slope * rmin[gidx]), std::abs(base + slope * rmax[gidx])});
        }
    } else {
      for (std::size_t i = 0; i < n; ++i) db = std::max(db, std::abs(b_at(i, H_new, S_new, t + 1) - b_at(i, H, S, t)));
      db = std::max(db, alpha * ct * init->coeffs().cwiseAbs().maxCoeff());
    }

    if (!g_new.allFinite())
      throw DivergenceError("iterative TD produced non-finite coefficients", out.trace.spectral_radius);
    if (cfg.record_trace) {
      TraceRow row;
      row.iter = t + 1;
      const Eigen::VectorXd df = (g_new - g) + (ct_new - ct) * v0;
      row.step_change = std::sqrt(L.d.dot(df.cwiseAbs2()) / nd);
      row.coeff_norm = g_new.norm();
      row.error = reference ? std::sqrt(L.d.dot((g_new + ct_new * v0 - gref).cwiseAbs2()) / nd)
                            : std::numeric_limits<double>::quiet_NaN();
      out.trace.rows.push_back(row);
    }
    g = g_new;
    H = H_new;
    S = S_new;
    ct = ct_new;

    norm_hist.push_back(g.norm());
    const std::size_t k = norm_hist.size();
    if (k >= 100 && k % 50 == 0 && norm_hist[k - 51] > 0.0 && norm_hist[k - 1] > 10.0 * norm_hist[k - 51])
      throw DivergenceError("iterative TD diverged: coefficient norm grew 10x over 50 steps",
                            out.trace.spectral_radius);
    out.trace.last_change = db;
    if (cfg.iters == 0 && db < cfg.tol) {
      ++t;
      out.trace.converged = true;
      break;
    }
  }
  out.trace.iterations = t;
  if (cfg.iters > 0) out.trace.converged = true;

  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = b_at(i, H, S, t);
  std::shared_ptr<const PointSet> anchors = copy_anchors(batch);
  if (init && init->size() > 0) {
    auto merged = std::make_shared<PointSet>(*anchors);
    for (std::size_t j = 0; j < init->size(); ++j) merged->push_back(init->anchors().point(j));
    Eigen::VectorXd bb(b.size() + init->coeffs().size());
    bb << b, ct * init->coeffs();
    out.q = std::make_shared<const QEstimate>(kernel, std::move(merged), std::move(bb));
  } else {
    out.q = std::make_shared<const QEstimate>(kernel, std::move(anchors), std::move(b));
  }
  return out;
}

IterateResult iterate_dense(const SampleBatch& batch, std::shared_ptr<const Kernel> kernel, double gamma,
                            const TdSolverConfig& cfg, std::shared_ptr<const QEstimate> init,
                            const Eigen::VectorXd* reference) {
  const std::size_t n = batch.size();
  const double nd = static_cast<double>(n);
  const TdSystem sys = build_td_system(batch, *kernel);
  IterateResult out;
  double eta, alpha;
  if (cfg.eta <= 0.0) {
    const StepSize st = auto_step_size(sys.K, sys.C, cfg.lambda, n, gamma);
    eta = st.eta;
    alpha = st.alpha;
    out.trace.spectral_radius = st.spectral_radius;
  } else {
    eta = cfg.eta;
    alpha = cfg.alpha >= 0.0 ? cfg.alpha : eta * cfg.lambda * nd;
    const Eigen::MatrixXd G = iteration_matrix(sys.K, sys.C, eta, alpha, gamma);
    out.trace.spectral_radius =
        power_spectral_radius([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return G * x; }, G.rows());
  }
  out.trace.eta = eta;
  out.trace.alpha = alpha;

  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(N), u1 = Eigen::VectorXd::Zero(N);
  double init_inf = 0.0;
  if (init) {
    u0 = init->evaluate(batch.omega0);
    u1 = init->evaluate(batch.omega1);
    for (std::size_t i = 0; i < n; ++i)
      if (batch.terminal[i]) u1[static_cast<Eigen::Index>(i)] = 0.0;
    init_inf = init->coeffs().size() ? init->coeffs().cwiseAbs().maxCoeff() : 0.0;
  }
  Eigen::VectorXd fref;
  if (reference) fref = sys.K * *reference;

  Eigen::VectorXd b = Eigen::VectorXd::Zero(N), Kb = Eigen::VectorXd::Zero(N), Cb = Eigen::VectorXd::Zero(N);
  double ct = 1.0;
  const int limit = cfg.iters > 0 ? cfg.iters : cfg.max_iters;
  std::vector<double> norm_hist;
  int t = 0;
  for (; t < limit; ++t) {
    const Eigen::VectorXd e = (Kb + ct * u0) - sys.r - gamma * (Cb + ct * u1);
    const Eigen::VectorXd b_new = (1.0 - alpha) * b - eta * e;
    if (!b_new.allFinite())
      throw DivergenceError("iterative TD produced non-finite coefficients", out.trace.spectral_radius);
    const Eigen::VectorXd Kb_new = sys.K * b_new;
    const Eigen::VectorXd Cb_new = sys.C * b_new;
    const double ct_new = ct * (1.0 - alpha);
    const double db = std::max((b_new - b).cwiseAbs().maxCoeff(), alpha * ct * init_inf);
    if (cfg.record_trace) {
      TraceRow row;
      row.iter = t + 1;
      row.step_change = ((Kb_new - Kb) + (ct_new - ct) * u0).norm() / std::sqrt(nd);
      row.coeff_norm = b_new.norm();
      row.error = reference ? (Kb_new + ct_new * u0 - fref).norm() / std::sqrt(nd)
                            : std::numeric_limits<double>::quiet_NaN();
      out.trace.rows.push_back(row);
    }
    b = b_new;
    Kb = Kb_new;
    Cb = Cb_new;
    ct = ct_new;
    norm_hist.push_back(b.norm());
    const std::size_t k = norm_hist.size();
    if (k >= 100 && k % 50 == 0 && norm_hist[k - 51] > 0.0 && norm_hist[k - 1] > 10.0 * norm_hist[k - 51])
      throw DivergenceError("iterative TD diverged: coefficient norm grew 10x over 50 steps",
                            out.trace.spectral_radius);
    out.trace.last_change = db;
    if (cfg.iters == 0 && db < cfg.tol) {
      ++t;
      out.trace.converged = true;
      break;
    }
  }
  out.trace.iterations = t;
  if (cfg.iters > 0) out.trace.converged = true;

  std::shared_ptr<const PointSet> anchors = copy_anchors(batch);
  if (init && init->size() > 0) {
    auto merged = std::make_shared<PointSet>(*anchors);
    for (std::size_t j = 0; j < init->size(); ++j) merged->push_back(init->anchors().point(j));
    Eigen::VectorXd bb(b.size() + init->coeffs().size());
    bb << b, ct * init->coeffs();
    // u0 holds the previous estimate at the batch anchors, so the cross term needs no Gram matrix.
    const double norm_sq = b.dot(Kb) + 2.0 * ct * b.dot(u0) + ct * ct * init->rkhs_norm_sq();
    out.q = std::make_shared<const QEstimate>(kernel, std::move(merged), std::move(bb), std::max(norm_sq, 0.0));
  } else {
    const double norm_sq = b.dot(Kb);
    out.q = std::make_shared<const QEstimate>(kernel, std::move(anchors), std::move(b), norm_sq);
  }
  return out;
}

}  // namespace

IterateResult kernel_td_iterate(const SampleBatch& batch, std::shared_ptr<const Kernel> kernel, double gamma,
                                const TdSolverConfig& cfg, std::shared_ptr<const QEstimate> init,
                                const Eigen::VectorXd* reference) {
  if (!kernel) throw ConfigError("iterative TD: null kernel");
  check_batch(batch, *kernel, gamma);
  if (!(cfg.lambda >= 0.0)) throw ConfigError("iterative TD: lambda must be nonnegative");
  if (cfg.eta > 0.0 && cfg.alpha >= 1.0) throw ConfigError("iterative TD: alpha must lie in [0, 1)");
  if (cfg.iters < 0 || cfg.max_iters < 0) throw ConfigError("iterative TD: iteration counts must be nonnegative");
  if (reference && reference->size() != static_cast<Eigen::Index>(batch.size()))
    throw ConfigError("iterative TD: reference coefficients do not match the batch");
  if (init && !(init->kernel().spec() == kernel->spec()))
    throw ConfigError("iterative TD: init uses a different kernel");
  if (kernel->is_tabular()) return iterate_tabular(batch, kernel, gamma, cfg, init, reference);
  return iterate_dense(batch, kernel, gamma, cfg, init, reference);
}

Eigen::VectorXd bellman_residuals(const SampleBatch& batch, const QFunction& q, double gamma) {
  const Eigen::VectorXd v0 = q(batch.omega0);
  const Eigen::VectorXd v1 = q(batch.omega1);
  Eigen::VectorXd eps(v0.size());
  for (Eigen::Index i = 0; i < v0.size(); ++i) {
    const double next = batch.terminal[static_cast<std::size_t>(i)] ? 0.0 : v1[i];
    eps[i] = batch.rewards[i] + gamma * next - v0[i];
  }
  return eps;
}

double empirical_distance(const SampleBatch& batch, const QFunction& a, const QFunction& b) {
  const Eigen::VectorXd d = a(batch.omega0) - b(batch.omega0);
  return d.norm() / std::sqrt(static_cast<double>(d.size()));
}

DecompositionResult error_decomposition_residual(const SampleBatch& batch, const QEstimate& q_hat,
                                                 const QEstimate& q_exact, double lambda, double gamma) {
  if (!(q_hat.kernel().spec() == q_exact.kernel().spec()))
    throw ConfigError("error decomposition: estimates must share one kernel");
  const auto n = static_cast<double>(batch.size());
  const Eigen::VectorXd h0 = q_hat.evaluate(batch.omega0), h1 = q_hat.evaluate(batch.omega1);
  const Eigen::VectorXd q0 = q_exact.evaluate(batch.omega0), q1 = q_exact.evaluate(batch.omega1);
  double quad = 0.0, cross = 0.0;
  for (Eigen::Index i = 0; i < h0.size(); ++i) {
    const bool term = batch.terminal[static_cast<std::size_t>(i)] != 0;
    const double D0 = h0[i] - q0[i];
    const double D1 = term ? 0.0 : h1[i] - q1[i];
    const double eps = batch.rewards[i] + (term ? 0.0 : gamma * q1[i]) - q0[i];
    quad += D0 * D0 - gamma * D0 * D1;
    cross += eps * D0;
  }
  quad /= n;
  cross /= n;
  const double hh = q_hat.rkhs_norm_sq();
  const double hq = q_hat.inner(q_exact);
  const double qq = q_exact.rkhs_norm_sq();
  const double d_hat = hh - hq;           // <D, Qhat>
  const double d_q = hq - qq;             // <D, Q>
  const double d_d = hh - 2.0 * hq + qq;  // ||D||^2

  DecompositionResult out;
  out.note = "proof form: LHS + lambda ||D||^2 = (1/n) sum eps D0 - lambda <D, Q>";
  out.lhs_statement = quad;
  out.rhs_statement = cross - lambda * d_hat;
  out.lhs_proof = quad + lambda * d_d;
  out.rhs_proof = cross - lambda * d_q;
  out.residual_statement = std::abs(out.lhs_statement - out.rhs_statement);
  out.residual_proof = std::abs(out.lhs_proof - out.rhs_proof);
  out.relative_proof = out.residual_proof / (1.0 + std::abs(out.lhs_proof));
  return out;
}

DecompositionResult error_decomposition_residual(const SampleBatch&, const QEstimate&, const QFunction&, double,
                                                 double) {
  DecompositionResult out;
  out.skipped = true;
  out.note = "skipped: the exact Q function is not representable in the kernel span";
  return out;
}

}  // namespace knpg

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "agesir/nnls.hpp"
#include "agesir/regression.hpp"

namespace agesir {

/// Sliding-window detector configuration. Defaults follow the estimation
/// pipeline defaults: 30-day windows advanced 5 days at a time, constraint
/// radius factor 1e-4, error-ratio threshold 3, and phases of 20 days or
/// fewer merged into their predecessor.
struct PhaseConfig {
  int w = 30;
  int dp = 5;
  double eps = 1e-4;
  double delta = 3.0;
  int min_phase = 20;

  void validate() const {
    if (!(w > dp && dp > 0)) throw std::invalid_argument("need w > dp > 0");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  }
};

struct WindowDiagnostics {
  int p = 0;
  double e_unconstrained = 0.0;  // Problem (a) mean-square error
  double e_constrained = 0.0;    // Problem (b) mean-square error
  double ratio = 0.0;
  bool flagged = false;
};

struct PhaseSet {
  std::vector<int> boundaries;
  std::vector<WindowDiagnostics> windows;
};

namespace detail {

// Exact projections onto the two constraint sets.
inline Eigen::VectorXd project_orthant(const Eigen::VectorXd& v) {
  return v.cwiseMax(0.0);
}

inline Eigen::VectorXd project_ball(const Eigen::VectorXd& v, const Eigen::VectorXd& center,
                                    double radius) {
  const Eigen::VectorXd diff = v - center;
  const double norm = diff.norm();
  if (norm <= radius) return v;
  return center + diff * (radius / norm);
}

// Dykstra's alternating projections onto {x >= 0} intersect the ball.
// The center is nonnegative, so the intersection is nonempty.
inline Eigen::VectorXd project_intersection(const Eigen::VectorXd& v,
                                            const Eigen::VectorXd& center, double radius) {
  Eigen::VectorXd x = v;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(v.size());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(v.size());
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd y = project_orthant(x + p);
    p = x + p - y;
    const Eigen::VectorXd x_next = project_ball(y + q, center, radius);
    q = y + q - x_next;
    const double move = (x_next - x).norm();
    x = x_next;
    if (move <= 1e-15 * std::max(1.0, x.norm()) && it > 1) break;
  }
  // Scale into the ball, then clamp: clamping never moves a point away from a
  // nonnegative center, so both constraints hold afterwards.
  x = project_ball(x, center, radius);
  return project_orthant(x);
}

}  // namespace detail

/// Minimizes ||C x - d||^2 over {x >= 0} intersected with the 2-norm ball of
/// the given center and radius, by projected gradient descent with Dykstra's
/// projection onto the intersection. The center must be nonnegative.
inline NnlsReport solve_constrained(const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                    const Eigen::VectorXd& center, double radius,
                                    int max_iter = 20000) {
  if (radius < 0.0) throw std::invalid_argument("solve_constrained: negative radius");
  for (Eigen::Index j = 0; j < center.size(); ++j)
    if (center[j] < 0.0) throw std::invalid_argument("solve_constrained: negative center");

  NnlsReport rep;
  if (radius == 0.0) {
    rep.x = center;
    rep.residual_norm = (C * rep.x - d).norm();
    rep.kkt_residual = 0.0;
    return rep;
  }

  // When the unconstrained nonnegative optimum already lies in the ball, it
  // is the constrained optimum; returning it exactly avoids the slow tail of
  // the projected-gradient iteration on ill-conditioned windows.
  try {
    NnlsReport free = nnls(C, d);
    if ((free.x - center).norm() <= radius) return free;
  } catch (const std::runtime_error&) {
    // fall through to the projected-gradient path
  }

  // Lipschitz constant of the gradient.
  const Eigen::MatrixXd H = C.transpose() * C;
  const double lips = H.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
  if (!(lips > 0.0)) {
    // Zero quadratic: every feasible point is optimal.
    rep.x = detail::project_intersection(center, center, radius);
    rep.residual_norm = (C * rep.x - d).norm();
    return rep;
  }
  const double step = 1.0 / lips;
  const Eigen::VectorXd g0 = C.transpose() * d;
  auto objective = [&](const Eigen::VectorXd& v) { return (C * v - d).squaredNorm(); };

  // Accelerated projected gradient with function-value restart.
  Eigen::VectorXd x = detail::project_intersection(center, center, radius);
  Eigen::VectorXd momentum = x;
  double t_prev = 1.0;
  double obj_prev = objective(x);
  double best_obj = obj_prev;
  Eigen::VectorXd best_x = x;
  int stall = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd grad = H * momentum - g0;
    Eigen::VectorXd x_next = detail::project_intersection(momentum - step * grad, center, radius);
    double obj = objective(x_next);
    if (obj > obj_prev) {
      // Restart from the last monotone iterate.
      momentum = x;
      t_prev = 1.0;
      const Eigen::VectorXd g2 = H * momentum - g0;
      x_next = detail::project_intersection(momentum - step * g2, center, radius);
      obj = objective(x_next);
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
      momentum = x_next + ((t_prev - 1.0) / t_next) * (x_next - x);
      t_prev = t_next;
    }

    if (obj < best_obj - 1e-16 * std::max(1.0, best_obj)) {
      best_obj = obj;
      best_x = x_next;
      stall = 0;
    } else if (++stall > 512) {
      x = x_next;
      break;
    }
    if ((x_next - x).norm() <= 1e-15 * std::max(1.0, x_next.norm())) {
      x = x_next;
      break;
    }
    x = x_next;
    obj_prev = obj;
  }

  rep.x = best_x;
  rep.iterations = it;
  rep.residual_norm = (C * rep.x - d).norm();
  // Stationarity measure: norm of the projected gradient step at the solution.
  const Eigen::VectorXd mapped =
      detail::project_intersection(rep.x - step * (H * rep.x - g0), center, radius);
  rep.kkt_residual = (rep.x - mapped).norm() / step;
  return rep;
}

/// Sliding-window phase detection. For each start day p = dp, 2 dp, ... whose
/// window [p, p+w] fits in the data, fits the window unconstrained (Problem a)
/// and constrained to a ball around the previous window's unconstrained fit
/// (Problem b), and flags p when the relative mean-square-error gap exceeds
/// delta. Flags closer than min_phase to the previous kept boundary are then
/// merged away, scanning in ascending order.
inline PhaseSet detect_phases(const Trajectory& data, const PhaseConfig& cfg) {
  cfg.validate();
  const int total_days = static_cast<int>(data.size());
  if (total_days < cfg.w + cfg.dp) throw std::invalid_argument("data too short");

  PhaseSet out;
  Eigen::VectorXd prev_fit;
  bool have_prev = false;
  std::vector<int> flags;

  for (int p = cfg.dp; p + cfg.w <= total_days - 1; p += cfg.dp) {
    if (!have_prev) {
      RegressionSystem first = build_regression(data, p - cfg.dp, p - cfg.dp + cfg.w);
      prev_fit = nnls(first.C, first.d).x;
      have_prev = true;
    }
    RegressionSystem sys = build_regression(data, p, p + cfg.w);
    const NnlsReport unconstrained = nnls(sys.C, sys.d);
    const double e_a = mse(data, p, cfg.w, unconstrained.x);

    const double radius = cfg.eps * prev_fit.norm();
    const NnlsReport constrained = solve_constrained(sys.C, sys.d, prev_fit, radius);
    const double e_b = mse(data, p, cfg.w, constrained.x);

    WindowDiagnostics diag;
    diag.p = p;
    diag.e_unconstrained = e_a;
    diag.e_constrained = e_b;
    if (std::abs(e_b - e_a) <= 1e-15) {
      diag.ratio = 0.0;
    } else if (e_a == 0.0) {
      diag.ratio = std::numeric_limits<double>::infinity();
    } else {
      diag.ratio = std::abs(e_b - e_a) / e_a;
    }
    diag.flagged = diag.ratio > cfg.delta;
    if (diag.flagged) flags.push_back(p);
    out.windows.push_back(diag);

    prev_fit = unconstrained.x;
  }

  int phase_start = 0;
  for (int p : flags) {
    if (p - phase_start <= cfg.min_phase) continue;
    out.boundaries.push_back(p);
    phase_start = p;
  }
  return out;
}

}  // namespace agesir

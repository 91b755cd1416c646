#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace agesir {

/// Result of a nonnegative least-squares solve. kkt_residual is the largest
/// violation of the stationarity conditions: |g_j| for x_j > 0 and max(0, -g_j)
/// for x_j = 0, where g = C^T (C x - d).
struct NnlsReport {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool degenerate = false;
};

inline double kkt_residual_of(const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                              const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = C.transpose() * (C * x - d);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double v = (x[j] > 0.0) ? std::abs(g[j]) : std::max(0.0, -g[j]);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Lawson-Hanson active-set solve of min_{x >= 0} ||C x - d||_2^2.
/// Finite termination on small dense problems; throws if the iteration cap
/// is hit before the KKT conditions hold at tolerance tol.
inline NnlsReport nnls(const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                       double tol = 1e-8, int max_iter = -1) {
  const Eigen::Index cols = C.cols();
  if (C.rows() != d.size()) throw std::invalid_argument("nnls: dimension mismatch");
  if (max_iter < 0) max_iter = 10 * static_cast<int>(cols);

  NnlsReport rep;
  rep.x = Eigen::VectorXd::Zero(cols);
  std::vector<bool> passive(cols, false);

  // Entering threshold and final certificate scale with the gradient at the
  // origin, so badly scaled systems (large regularization stacks) terminate.
  const double scale = std::max(1.0, (C.transpose() * d).cwiseAbs().maxCoeff());
  const double tol_eff = tol * scale;

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (passive[j]) idx.push_back(j);
    Eigen::MatrixXd Cp(C.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Cp.col(k) = C.col(idx[k]);
    const Eigen::VectorXd zp = Cp.colPivHouseholderQr().solve(d);
    z.setZero(cols);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[k];
  };

  int outer = 0;
  while (true) {
    const Eigen::VectorXd w = C.transpose() * (d - C * rep.x);
    Eigen::Index best = -1;
    double best_w = tol_eff;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    if (++outer > max_iter)
      throw std::runtime_error("nnls: iteration cap exceeded");
    passive[best] = true;

    Eigen::VectorXd z(cols);
    while (true) {
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < cols; ++j)
        if (passive[j] && z[j] <= 0.0) feasible = false;
      if (feasible) break;

      double alpha = 1.0;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (passive[j] && z[j] <= 0.0) {
          const double step = rep.x[j] / (rep.x[j] - z[j]);
          alpha = std::min(alpha, step);
        }
      }
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!passive[j]) continue;
        rep.x[j] += alpha * (z[j] - rep.x[j]);
        if (rep.x[j] <= 1e-14 && z[j] <= 0.0) {
          rep.x[j] = 0.0;
          passive[j] = false;
        }
      }
    }
    rep.x = z;
  }

  rep.iterations = outer;
  rep.residual_norm = (C * rep.x - d).norm();
  rep.kkt_residual = kkt_residual_of(C, d, rep.x);
  if (rep.kkt_residual > tol_eff)
    throw std::runtime_error("nnls: KKT conditions not met at tolerance");
  return rep;
}

/// Tikhonov-regularized variant: min_{x >= 0} ||C x - d||^2 + lr ||x - x_prev||^2,
/// solved by stacking sqrt(lr) I under C and sqrt(lr) x_prev under d.
inline NnlsReport nnls_regularized(const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                   const Eigen::VectorXd& x_prev, double lambda_reg,
                                   double tol = 1e-8) {
  if (lambda_reg < 0.0) throw std::invalid_argument("nnls_regularized: negative lambda");
  if (x_prev.size() != C.cols())
    throw std::invalid_argument("nnls_regularized: x_prev dimension mismatch");
  for (Eigen::Index j = 0; j < x_prev.size(); ++j)
    if (x_prev[j] < 0.0) throw std::invalid_argument("nnls_regularized: negative x_prev");

  const double root = std::sqrt(lambda_reg);
  Eigen::MatrixXd Cs(C.rows() + C.cols(), C.cols());
  Eigen::VectorXd ds(d.size() + C.cols());
  Cs.topRows(C.rows()) = C;
  Cs.bottomRows(C.cols()) = root * Eigen::MatrixXd::Identity(C.cols(), C.cols());
  ds.head(d.size()) = d;
  ds.tail(C.cols()) = root * x_prev;
  NnlsReport rep = nnls(Cs, ds, tol);
  // Report the data-fit residual, not the stacked one.
  rep.residual_norm = (C * rep.x - d).norm();
  return rep;
}

}  // namespace agesir

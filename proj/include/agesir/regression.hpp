#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "agesir/model.hpp"
#include "agesir/nnls.hpp"

namespace agesir {

/// Linear system C x = d encoding the 1-day difference equations over a
/// window of day steps. Parameter layout: x = (A row-major, then gamma),
/// so x has m^2 + m entries.
struct RegressionSystem {
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  int m = 0;
};

inline int param_count(int m) { return m * m + m; }

namespace detail {

inline void require_unit_days(const Trajectory& traj) {
  for (std::size_t k = 1; k < traj.times.size(); ++k)
    if (std::abs(traj.times[k] - traj.times[k - 1] - 1.0) > 1e-9)
      throw std::invalid_argument("trajectory must be sampled at unit-day spacing");
}

}  // namespace detail

/// Stacks the difference equations for day steps k in [k0, k1): three rows per
/// (day, group) pair, in (s, beta, r) order. Day indices address traj.states.
inline RegressionSystem build_regression(const Trajectory& traj, int k0, int k1) {
  detail::require_unit_days(traj);
  if (k1 <= k0) throw std::invalid_argument("empty window");
  if (k0 < 0 || k1 > static_cast<int>(traj.size()) - 1)
    throw std::invalid_argument("window outside trajectory");

  const int m = traj.states.front().groups();
  const int steps = k1 - k0;
  RegressionSystem sys;
  sys.m = m;
  sys.C = Eigen::MatrixXd::Zero(3 * m * steps, param_count(m));
  sys.d = Eigen::VectorXd::Zero(3 * m * steps);

  int row = 0;
  for (int k = k0; k < k1; ++k) {
    const GroupFractions& cur = traj.states[k];
    const GroupFractions& nxt = traj.states[k + 1];
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double prod = cur.s[i] * cur.beta[j];
        sys.C(row, i * m + j) = -prod;
        sys.C(row + 1, i * m + j) = prod;
      }
      sys.C(row + 1, m * m + i) = -cur.beta[i];
      sys.C(row + 2, m * m + i) = cur.beta[i];
      sys.d[row] = nxt.s[i] - cur.s[i];
      sys.d[row + 1] = nxt.beta[i] - cur.beta[i];
      sys.d[row + 2] = nxt.r[i] - cur.r[i];
      row += 3;
    }
  }
  return sys;
}

/// Unpacks a parameter vector into ModelParams with only A and gamma set.
inline ModelParams unpack_params(const Eigen::VectorXd& x, int m) {
  if (x.size() != param_count(m)) throw std::invalid_argument("parameter vector size mismatch");
  ModelParams p;
  p.m = m;
  p.A.assign(m, std::vector<double>(m, 0.0));
  p.gamma.assign(m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) p.A[i][j] = x[i * m + j];
  for (int i = 0; i < m; ++i) p.gamma[i] = x[m * m + i];
  return p;
}

/// Free-runs the 1-day dynamics from an anchor state for the given number of
/// day steps under the packed parameters.
inline Trajectory generated_trajectory(const Eigen::VectorXd& x, const GroupFractions& anchor,
                                       int days) {
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x[j] < 0.0) throw std::invalid_argument("negative parameter");
  const int m = anchor.groups();
  return iterate_discrete(unpack_params(x, m), anchor, days);
}

/// Mean-square error of the model free-run against the data over days
/// p..p+w inclusive, averaged over all 3 m (w+1) entries. The free-run is
/// anchored at the observed state on day p.
inline double mse(const Trajectory& data, int p, int w, const Eigen::VectorXd& x) {
  detail::require_unit_days(data);
  if (p < 0 || p + w >= static_cast<int>(data.size()))
    throw std::invalid_argument("mse window outside trajectory");
  const int m = data.states.front().groups();
  const Trajectory gen = generated_trajectory(x, data.states[p], w);
  double acc = 0.0;
  for (int k = 0; k <= w; ++k) {
    const GroupFractions& obs = data.states[p + k];
    const GroupFractions& est = gen.states[k];
    for (int i = 0; i < m; ++i) {
      const double es = obs.s[i] - est.s[i];
      const double eb = obs.beta[i] - est.beta[i];
      const double er = obs.r[i] - est.r[i];
      acc += es * es + eb * eb + er * er;
    }
  }
  return acc / (3.0 * m * (w + 1));
}

/// One per-phase parameter estimate.
struct PhaseEstimate {
  int phase_index = 0;  // 1-based
  int start_day = 0;
  int end_day = 0;  // exclusive
  NnlsReport report;
};

/// Runs the per-phase estimation chain: the first phase is a plain
/// nonnegative least-squares fit; every later phase is regularized toward the
/// previous phase's estimate. Boundaries are interior day indices; an empty
/// list means a single phase over the whole timeline.
inline std::vector<PhaseEstimate> estimate_per_phase(const Trajectory& data,
                                                     const std::vector<int>& boundaries,
                                                     double lambda_reg = 1e-5,
                                                     double tol = 1e-8) {
  detail::require_unit_days(data);
  const int last_day = static_cast<int>(data.size()) - 1;
  std::vector<int> edges;
  edges.push_back(0);
  for (int b : boundaries) {
    if (b <= edges.back() || b >= last_day)
      throw std::invalid_argument("phase boundaries must increase inside the timeline");
    edges.push_back(b);
  }
  edges.push_back(last_day);

  std::vector<PhaseEstimate> out;
  Eigen::VectorXd x_prev;
  for (std::size_t ph = 0; ph + 1 < edges.size(); ++ph) {
    const int start = edges[ph];
    const int stop = edges[ph + 1];  // last day step targets this day
    if (stop - start < 2) throw std::invalid_argument("phase shorter than 2 days");
    RegressionSystem sys = build_regression(data, start, stop);

    PhaseEstimate est;
    est.phase_index = static_cast<int>(ph) + 1;
    est.start_day = start;
    est.end_day = stop;
    const bool degenerate = sys.C.cwiseAbs().maxCoeff() == 0.0;
    if (ph == 0) {
      est.report = nnls(sys.C, sys.d, tol);
    } else {
      est.report = nnls_regularized(sys.C, sys.d, x_prev, lambda_reg, tol);
    }
    est.report.degenerate = degenerate;
    x_prev = est.report.x;
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace agesir

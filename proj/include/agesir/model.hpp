#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace agesir {

using Matrix = std::vector<std::vector<double>>;

/// Model parameters for the age-structured SIR dynamics and the network
/// process. Rates are per day. For ODE-only work it is enough to supply the
/// contact matrix A; the network fields (B, rho, group_sizes) are required
/// by the stochastic simulator, with A = rho o B elementwise.
struct ModelParams {
  int m = 0;                      // number of age groups
  Matrix A;                       // contact rates A[i][j]
  Matrix B;                       // per-edge transmission rates
  Matrix rho;                     // edge-probability numerators (edge prob = rho/n)
  std::vector<double> gamma;      // recovery rates
  double lambda_edge = 1.0;       // edge update rate
  std::vector<long> group_sizes;  // |A_i|, simulation only

  bool has_network() const { return !B.empty() && !rho.empty(); }

  long total_population() const {
    long n = 0;
    for (long g : group_sizes) n += g;
    return n;
  }

  /// Contact matrix used by the deterministic dynamics: A when given,
  /// otherwise rho o B.
  const Matrix& contacts() const {
    if (!A.empty()) return A;
    throw std::logic_error("contact matrix not materialized; call validate_params first");
  }
};

/// Per-group susceptible/infected/recovered fractions of the total
/// population; the state of both the ODE and the discrete dynamics.
struct GroupFractions {
  std::vector<double> s;
  std::vector<double> beta;
  std::vector<double> r;

  int groups() const { return static_cast<int>(s.size()); }

  double mass() const {
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) total += s[i] + beta[i] + r[i];
    return total;
  }
};

struct Derivatives {
  std::vector<double> ds;
  std::vector<double> dbeta;
  std::vector<double> dr;
};

/// Time-stamped sequence of states; times are in days and strictly increase.
struct Trajectory {
  std::vector<double> times;
  std::vector<GroupFractions> states;

  std::size_t size() const { return times.size(); }
};

namespace detail {

inline void check_matrix(const Matrix& mat, int m, const char* name) {
  if (static_cast<int>(mat.size()) != m)
    throw std::invalid_argument(std::string(name) + ": dimension mismatch");
  for (const auto& row : mat) {
    if (static_cast<int>(row.size()) != m)
      throw std::invalid_argument(std::string(name) + ": dimension mismatch");
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + ": non-finite entry");
      if (v < 0.0) throw std::invalid_argument(std::string(name) + ": negative entry");
    }
  }
}

}  // namespace detail

/// Validates and completes a parameter set. Fills A from rho o B when A is
/// absent, and checks A == rho o B (tolerance 1e-12) when all three are given.
inline ModelParams validate_params(ModelParams p) {
  if (p.m <= 0) throw std::invalid_argument("m must be positive");
  if (!p.A.empty()) detail::check_matrix(p.A, p.m, "A");
  if (!p.B.empty()) detail::check_matrix(p.B, p.m, "B");
  if (!p.rho.empty()) detail::check_matrix(p.rho, p.m, "rho");
  if (p.B.empty() != p.rho.empty())
    throw std::invalid_argument("B and rho must be supplied together");
  if (p.A.empty() && p.B.empty())
    throw std::invalid_argument("need A, or B and rho");

  if (static_cast<int>(p.gamma.size()) != p.m)
    throw std::invalid_argument("gamma: dimension mismatch");
  for (double g : p.gamma) {
    if (!std::isfinite(g)) throw std::invalid_argument("gamma: non-finite entry");
    if (g < 0.0) throw std::invalid_argument("gamma: negative entry");
  }
  if (!(p.lambda_edge > 0.0) || !std::isfinite(p.lambda_edge))
    throw std::invalid_argument("lambda_edge must be positive");

  if (!p.group_sizes.empty()) {
    if (static_cast<int>(p.group_sizes.size()) != p.m)
      throw std::invalid_argument("group_sizes: dimension mismatch");
    for (long g : p.group_sizes)
      if (g <= 0) throw std::invalid_argument("group_sizes: non-positive entry");
    if (!p.rho.empty()) {
      const double n = static_cast<double>(p.total_population());
      for (int i = 0; i < p.m; ++i)
        for (int j = 0; j < p.m; ++j)
          if (p.rho[i][j] / n > 1.0)
            throw std::invalid_argument("rho/n exceeds 1 for the simulated population");
    }
  }

  if (!p.B.empty()) {
    if (p.A.empty()) {
      p.A.assign(p.m, std::vector<double>(p.m, 0.0));
      for (int i = 0; i < p.m; ++i)
        for (int j = 0; j < p.m; ++j) p.A[i][j] = p.rho[i][j] * p.B[i][j];
    } else {
      for (int i = 0; i < p.m; ++i)
        for (int j = 0; j < p.m; ++j)
          if (std::abs(p.A[i][j] - p.rho[i][j] * p.B[i][j]) > 1e-12)
            throw std::invalid_argument("A != rho o B beyond tolerance");
    }
  }
  return p;
}

inline void check_fractions(const GroupFractions& f, int m) {
  if (f.groups() != m || static_cast<int>(f.beta.size()) != m ||
      static_cast<int>(f.r.size()) != m)
    throw std::invalid_argument("state: dimension mismatch");
  for (int i = 0; i < m; ++i) {
    if (f.s[i] < 0.0 || f.beta[i] < 0.0 || f.r[i] < 0.0)
      throw std::invalid_argument("state: negative fraction");
  }
  if (std::abs(f.mass() - 1.0) > 1e-9)
    throw std::invalid_argument("state: fractions do not sum to 1");
}

/// Right-hand side of the continuous dynamics:
///   ds_i = -s_i sum_j A_ij beta_j,  dbeta_i = -ds_i - gamma_i beta_i,
///   dr_i = gamma_i beta_i.
inline Derivatives ode_rhs(const ModelParams& p, const GroupFractions& f) {
  const Matrix& A = p.contacts();
  Derivatives d;
  d.ds.resize(p.m);
  d.dbeta.resize(p.m);
  d.dr.resize(p.m);
  for (int i = 0; i < p.m; ++i) {
    double force = 0.0;
    for (int j = 0; j < p.m; ++j) force += A[i][j] * f.beta[j];
    const double flow = f.s[i] * force;
    d.ds[i] = -flow;
    d.dbeta[i] = flow - p.gamma[i] * f.beta[i];
    d.dr[i] = p.gamma[i] * f.beta[i];
  }
  return d;
}

namespace detail {

// Clamp rounding-level negatives to zero; anything worse is a model error.
inline void clamp_state(GroupFractions& f, double floor_tol, const char* what) {
  for (int i = 0; i < f.groups(); ++i) {
    double* chans[3] = {&f.s[i], &f.beta[i], &f.r[i]};
    for (double* c : chans) {
      if (!std::isfinite(*c)) throw std::runtime_error(std::string(what) + ": non-finite state");
      if (*c < 0.0) {
        if (*c < -floor_tol) throw std::runtime_error(std::string(what) + ": negative compartment");
        *c = 0.0;
      }
    }
  }
}

}  // namespace detail

/// Classical fixed-step 4th-order integration of ode_rhs, sampled every dt.
/// The final sample time is the first grid point >= t_end.
inline Trajectory integrate_ode(const ModelParams& p, const GroupFractions& init,
                                double t_end, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (t_end < 0.0) throw std::invalid_argument("t_end must be nonnegative");
  check_fractions(init, p.m);

  const long steps = (t_end == 0.0) ? 0 : static_cast<long>(std::ceil(t_end / dt - 1e-12));
  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(init);

  GroupFractions y = init;
  const int m = p.m;
  auto axpy = [m](const GroupFractions& base, double h, const Derivatives& k) {
    GroupFractions out = base;
    for (int i = 0; i < m; ++i) {
      out.s[i] = base.s[i] + h * k.ds[i];
      out.beta[i] = base.beta[i] + h * k.dbeta[i];
      out.r[i] = base.r[i] + h * k.dr[i];
    }
    return out;
  };

  for (long step = 1; step <= steps; ++step) {
    const Derivatives k1 = ode_rhs(p, y);
    const Derivatives k2 = ode_rhs(p, axpy(y, 0.5 * dt, k1));
    const Derivatives k3 = ode_rhs(p, axpy(y, 0.5 * dt, k2));
    const Derivatives k4 = ode_rhs(p, axpy(y, dt, k3));
    for (int i = 0; i < m; ++i) {
      y.s[i] += dt / 6.0 * (k1.ds[i] + 2.0 * (k2.ds[i] + k3.ds[i]) + k4.ds[i]);
      y.beta[i] += dt / 6.0 * (k1.dbeta[i] + 2.0 * (k2.dbeta[i] + k3.dbeta[i]) + k4.dbeta[i]);
      y.r[i] += dt / 6.0 * (k1.dr[i] + 2.0 * (k2.dr[i] + k3.dr[i]) + k4.dr[i]);
    }
    detail::clamp_state(y, 1e-12, "integrate_ode");
    traj.times.push_back(static_cast<double>(step) * dt);
    traj.states.push_back(y);
  }
  return traj;
}

/// One step of the 1-day discretization:
///   s'_i = s_i - s_i sum_j A_ij beta_j,
///   b'_i = beta_i + s_i sum_j A_ij beta_j - gamma_i beta_i,
///   r'_i = r_i + gamma_i beta_i.
inline GroupFractions discrete_step(const ModelParams& p, const GroupFractions& f) {
  // One explicit Euler step of ode_rhs with h = 1, the same arithmetic the
  // difference equations prescribe.
  const Derivatives d = ode_rhs(p, f);
  GroupFractions out = f;
  for (int i = 0; i < p.m; ++i) {
    out.s[i] = f.s[i] + d.ds[i];
    out.beta[i] = f.beta[i] + d.dbeta[i];
    out.r[i] = f.r[i] + d.dr[i];
  }
  detail::clamp_state(out, 1e-12, "discrete_step");
  return out;
}

/// K applications of discrete_step; times 0..K.
inline Trajectory iterate_discrete(const ModelParams& p, const GroupFractions& init, int days) {
  if (days < 0) throw std::invalid_argument("day count must be nonnegative");
  check_fractions(init, p.m);
  Trajectory traj;
  traj.times.reserve(days + 1);
  traj.states.reserve(days + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(init);
  GroupFractions f = init;
  for (int k = 1; k <= days; ++k) {
    f = discrete_step(p, f);
    traj.times.push_back(static_cast<double>(k));
    traj.states.push_back(f);
  }
  return traj;
}

}  // namespace agesir

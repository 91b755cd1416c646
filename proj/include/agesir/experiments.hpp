#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/model.hpp"
#include "agesir/network.hpp"
#include "agesir/stats.hpp"

namespace agesir {

/// Largest-remainder rounding of target fractions to integer counts that sum
/// to the given total.
inline std::vector<long> round_to_counts(const std::vector<double>& fractions, long total) {
  const int k = static_cast<int>(fractions.size());
  std::vector<long> counts(k, 0);
  std::vector<std::pair<double, int>> remainders(k);
  long assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = fractions[i] * static_cast<double>(total);
    counts[i] = static_cast<long>(std::floor(exact));
    assigned += counts[i];
    remainders[i] = {exact - std::floor(exact), i};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long extra = total - assigned, i = 0; extra > 0; --extra, ++i)
    ++counts[remainders[i % k].second];
  return counts;
}

/// Scenario shared by the convergence and converse experiments: group
/// composition and initial infection levels as fractions of the total
/// population, so they scale to any n.
struct ExperimentBase {
  int m = 1;
  std::vector<double> group_fractions;     // sums to 1
  std::vector<double> infected_fractions;  // of the total population, per group
  Matrix B;
  Matrix rho;
  std::vector<double> gamma;
  double sample_dt = 0.5;
  double ode_dt = 0.01;
};

namespace detail {

inline ModelParams concretize(const ExperimentBase& base, long n, double lambda) {
  ModelParams p;
  p.m = base.m;
  p.B = base.B;
  p.rho = base.rho;
  p.gamma = base.gamma;
  p.lambda_edge = lambda;
  p.group_sizes = round_to_counts(base.group_fractions, n);
  return validate_params(std::move(p));
}

inline std::vector<long> initial_counts(const ExperimentBase& base, const ModelParams& p) {
  std::vector<long> counts(base.m, 0);
  for (int i = 0; i < base.m; ++i) {
    counts[i] = std::lround(base.infected_fractions[i] * static_cast<double>(p.total_population()));
    counts[i] = std::min(counts[i], p.group_sizes[i]);
  }
  return counts;
}

inline GroupFractions limit_initial_state(const ExperimentBase& base) {
  GroupFractions f;
  f.s.resize(base.m);
  f.beta.resize(base.m);
  f.r.assign(base.m, 0.0);
  for (int i = 0; i < base.m; ++i) {
    f.beta[i] = base.infected_fractions[i];
    f.s[i] = base.group_fractions[i] - base.infected_fractions[i];
  }
  return f;
}

}  // namespace detail

/// Squared distance between a sampled mean trajectory and the mean-field
/// solution: max over shared sample times and groups of
/// mean ||(s_i, beta_i) - (y_i, w_i)||^2. The second argument must be sampled
/// at least as finely as the first.
inline double mean_field_gap(const Trajectory& sampled, const Trajectory& reference) {
  double worst = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < sampled.size(); ++k) {
    while (j + 1 < reference.size() && reference.times[j] < sampled.times[k] - 1e-9) ++j;
    if (std::abs(reference.times[j] - sampled.times[k]) > 1e-6)
      throw std::invalid_argument("mean_field_gap: reference grid does not cover sample times");
    const GroupFractions& a = sampled.states[k];
    const GroupFractions& b = reference.states[j];
    for (int i = 0; i < a.groups(); ++i) {
      const double ds = a.s[i] - b.s[i];
      const double db = a.beta[i] - b.beta[i];
      worst = std::max(worst, ds * ds + db * db);
    }
  }
  return worst;
}

struct ConvergenceRow {
  long n = 0;
  double lambda = 0.0;
  double error = 0.0;   // E_n
  double std_error = 0.0;  // bootstrap standard error of E_n
};

/// Monte-Carlo check of the mean-field limit: for each population size n,
/// runs M lazy-mode realizations with edge update rate lambda_rule(n) and
/// reports E_n = max over sample times and groups of the Monte-Carlo estimate
/// of E[||(s_i, beta_i) - (y_i, w_i)||^2], with a bootstrap standard error.
inline std::vector<ConvergenceRow> convergence_sweep(
    const ExperimentBase& base, const std::vector<long>& n_list,
    const std::function<double(long)>& lambda_rule, long runs, double t_end,
    std::uint64_t base_seed, int bootstrap_resamples = 1000) {
  const Trajectory reference =
      integrate_ode(detail::concretize(base, n_list.front(), lambda_rule(n_list.front())),
                    detail::limit_initial_state(base), t_end, base.ode_dt);

  std::vector<ConvergenceRow> rows;
  std::uint64_t seed = base_seed;
  for (long n : n_list) {
    const double lambda = lambda_rule(n);
    const ModelParams p = detail::concretize(base, n, lambda);
    const std::vector<long> init = detail::initial_counts(base, p);

    // Per-run squared deviations on the sample grid, kept per (time, group)
    // so both the estimate and its bootstrap can be formed.
    std::vector<std::vector<double>> sq;  // [run][time*groups + i]
    std::size_t grid = 0;
    for (long k = 0; k < runs; ++k) {
      NetworkState st = init_network(p, init, seed + static_cast<std::uint64_t>(k), SimMode::lazy);
      auto [traj, log] = simulate(st, p, t_end, base.sample_dt, SimMode::lazy, false);
      grid = traj.size();
      std::vector<double> row;
      row.reserve(grid * base.m);
      std::size_t j = 0;
      for (std::size_t s = 0; s < traj.size(); ++s) {
        while (j + 1 < reference.size() && reference.times[j] < traj.times[s] - 1e-9) ++j;
        for (int i = 0; i < base.m; ++i) {
          const double ds = traj.states[s].s[i] - reference.states[j].s[i];
          const double db = traj.states[s].beta[i] - reference.states[j].beta[i];
          row.push_back(ds * ds + db * db);
        }
      }
      sq.push_back(std::move(row));
    }
    seed += static_cast<std::uint64_t>(runs);

    auto error_of = [&](const std::vector<std::size_t>& pick) {
      double worst = 0.0;
      const std::size_t cells = grid * static_cast<std::size_t>(base.m);
      for (std::size_t c = 0; c < cells; ++c) {
        double acc = 0.0;
        for (std::size_t run : pick) acc += sq[run][c];
        worst = std::max(worst, acc / static_cast<double>(pick.size()));
      }
      return worst;
    };
    std::vector<std::size_t> all(runs);
    for (long k = 0; k < runs; ++k) all[k] = static_cast<std::size_t>(k);

    ConvergenceRow row;
    row.n = n;
    row.lambda = lambda;
    row.error = error_of(all);
    row.std_error = bootstrap_stderr(static_cast<std::size_t>(runs), error_of, bootstrap_resamples,
                                  base_seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(n));
    rows.push_back(row);
  }
  return rows;
}

struct GapStats {
  double t1 = 0.0, t2 = 0.0;
  std::vector<double> mean_s;  // per group, Monte-Carlo mean of s_i(t2)
  std::vector<double> ode_s;   // per group, y_i(t2)
  std::vector<double> gap;     // mean_s - ode_s
  std::vector<double> std_error;  // per group
  std::vector<double> z;       // gap / stderr
};

/// Monte-Carlo estimate of E[s_i(t2)] - y_i(t2). The ODE solution must have
/// y_i, w_i > 0 for every group throughout [t1, t2].
inline GapStats converse_gap(const ExperimentBase& base, double lambda, long n, long runs,
                             double t1, double t2, std::uint64_t base_seed,
                             SimMode mode = SimMode::lazy) {
  if (t2 < t1 || t1 < 0.0) throw std::invalid_argument("converse_gap: need 0 <= t1 <= t2");
  const ModelParams p = detail::concretize(base, n, lambda);
  const Trajectory ode =
      integrate_ode(p, detail::limit_initial_state(base), std::max(t2, base.ode_dt), base.ode_dt);
  for (std::size_t k = 0; k < ode.size(); ++k) {
    if (ode.times[k] < t1 - 1e-9 || ode.times[k] > t2 + 1e-9) continue;
    for (int i = 0; i < base.m; ++i)
      if (ode.states[k].s[i] <= 0.0 || ode.states[k].beta[i] <= 0.0)
        throw std::invalid_argument("converse_gap: ODE solution not positive on [t1, t2]");
  }

  const std::vector<long> init = detail::initial_counts(base, p);
  std::vector<std::vector<double>> finals(base.m);
  for (long k = 0; k < runs; ++k) {
    NetworkState st = init_network(p, init, base_seed + static_cast<std::uint64_t>(k), mode);
    auto [traj, log] = simulate(st, p, t2, std::max(t2, 1e-9), mode, false);
    for (int i = 0; i < base.m; ++i) finals[i].push_back(traj.states.back().s[i]);
  }

  std::size_t ode_at_t2 = ode.size() - 1;
  while (ode_at_t2 > 0 && ode.times[ode_at_t2 - 1] >= t2 - 1e-9) --ode_at_t2;

  GapStats stats;
  stats.t1 = t1;
  stats.t2 = t2;
  for (int i = 0; i < base.m; ++i) {
    const double mu = mean_of(finals[i]);
    const double se = stderr_of(finals[i]);
    const double y = ode.states[ode_at_t2].s[i];
    stats.mean_s.push_back(mu);
    stats.ode_s.push_back(y);
    stats.gap.push_back(mu - y);
    stats.std_error.push_back(se);
    stats.z.push_back(se > 0.0 ? (mu - y) / se : 0.0);
  }
  return stats;
}

struct EdgeAgeResult {
  double ks_stat = 0.0;
  double ks_critical = 0.0;
  bool ks_pass = false;
  double atom_mass = 0.0;           // empirical fraction of never-updated pairs
  double atom_expected = 0.0;       // e^{-lambda t}
  double atom_z = 0.0;
  std::vector<double> ages;
};

/// Distribution of T, the time since the designated pair's last edge update
/// at time t, across independent dense runs. Checked against the mixed law
/// F(tau) = 1 - e^{-lambda tau} on [0, t) with an atom of mass e^{-lambda t}
/// at tau = t.
inline EdgeAgeResult edge_age_distribution(const ModelParams& p,
                                           const std::vector<long>& initial_infected, int pair_a,
                                           int pair_b, double t, long samples,
                                           std::uint64_t base_seed) {
  if (!(t > 0.0)) throw std::invalid_argument("edge_age_distribution: t must be positive");
  EdgeAgeResult result;
  for (long k = 0; k < samples; ++k) {
    NetworkState st =
        init_network(p, initial_infected, base_seed + static_cast<std::uint64_t>(k), SimMode::dense);
    auto [traj, log] = simulate(st, p, t, t, SimMode::dense, true);
    double last_update = -1.0;
    for (const EventRecord& ev : log) {
      if (ev.kind == EventRecord::Kind::edge_update && ev.node_a == pair_a &&
          ev.node_b == pair_b && ev.time <= t)
        last_update = ev.time;
    }
    result.ages.push_back(last_update < 0.0 ? t : t - last_update);
  }

  const double lambda = p.lambda_edge;
  auto cdf = [lambda, t](double tau) {
    if (tau >= t) return 1.0;
    return 1.0 - std::exp(-lambda * tau);
  };
  // Left limit: the atom at tau = t contributes only from the right.
  auto cdf_left = [lambda, t](double tau) {
    if (tau > t) return 1.0;
    return 1.0 - std::exp(-lambda * tau);
  };
  result.ks_stat = ks_statistic(result.ages, cdf, cdf_left);
  result.ks_critical = ks_critical_one_sample_1pct(result.ages.size());
  result.ks_pass = result.ks_stat < result.ks_critical;

  long at_atom = 0;
  for (double age : result.ages)
    if (age >= t) ++at_atom;
  result.atom_mass = static_cast<double>(at_atom) / static_cast<double>(samples);
  result.atom_expected = std::exp(-lambda * t);
  const double sd = std::sqrt(result.atom_expected * (1.0 - result.atom_expected) /
                              static_cast<double>(samples));
  result.atom_z = sd > 0.0 ? (result.atom_mass - result.atom_expected) / sd : 0.0;
  return result;
}

struct EdgeDensityCell {
  int group_i = 0, group_j = 0;
  double mean_count = 0.0;     // mean on-edge count over the draws
  double expected = 0.0;       // N_ij rho_ij / n
  double sigma_mean = 0.0;     // binomial sd of the mean
  double z = 0.0;
};

/// Dense-mode check that the unconditional edge density matches rho_ij / n
/// at the given time: counts on-edges per ordered group pair over independent
/// draws and compares with the binomial expectation.
inline std::vector<EdgeDensityCell> edge_density_check(const ModelParams& p,
                                                       const std::vector<long>& initial_infected,
                                                       double t, long samples,
                                                       std::uint64_t base_seed) {
  const long n = p.total_population();
  std::vector<std::vector<long>> counts(p.m * p.m);
  for (long k = 0; k < samples; ++k) {
    NetworkState st =
        init_network(p, initial_infected, base_seed + static_cast<std::uint64_t>(k), SimMode::dense);
    if (t > 0.0) {
      auto [traj, log] = simulate(st, p, t, t, SimMode::dense, true);
    }
    std::vector<long> on(p.m * p.m, 0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        if (st.edge_bits[pair_index(a, b, n)]) ++on[st.group_of[a] * p.m + st.group_of[b]];
      }
    for (int c = 0; c < p.m * p.m; ++c) counts[c].push_back(on[c]);
  }

  std::vector<EdgeDensityCell> cells;
  for (int gi = 0; gi < p.m; ++gi) {
    for (int gj = 0; gj < p.m; ++gj) {
      const double q = p.rho[gi][gj] / static_cast<double>(n);
      double pairs = static_cast<double>(p.group_sizes[gi]) * static_cast<double>(p.group_sizes[gj]);
      if (gi == gj) pairs = static_cast<double>(p.group_sizes[gi]) *
                            static_cast<double>(p.group_sizes[gi] - 1);
      EdgeDensityCell cell;
      cell.group_i = gi;
      cell.group_j = gj;
      const std::vector<double> vals(counts[gi * p.m + gj].begin(), counts[gi * p.m + gj].end());
      cell.mean_count = mean_of(vals);
      cell.expected = pairs * q;
      cell.sigma_mean = std::sqrt(pairs * q * (1.0 - q) / static_cast<double>(samples));
      cell.z = cell.sigma_mean > 0.0 ? (cell.mean_count - cell.expected) / cell.sigma_mean : 0.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

}  // namespace agesir

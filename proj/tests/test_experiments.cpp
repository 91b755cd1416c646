#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "agesir/experiments.hpp"

using namespace agesir;

namespace {

ExperimentBase one_group_base() {
  ExperimentBase base;
  base.m = 1;
  base.group_fractions = {1.0};
  base.infected_fractions = {0.05};
  base.B = {{1.0}};
  base.rho = {{2.0}};
  base.gamma = {1.0};
  base.sample_dt = 0.5;
  base.ode_dt = 0.01;
  return base;
}

}  // namespace

TEST_CASE("round_to_counts sums to the total and stays within one of exact") {
  const auto counts = round_to_counts({0.5, 0.3, 0.2}, 101);
  REQUIRE(counts[0] + counts[1] + counts[2] == 101);
  REQUIRE(std::abs(counts[0] - 50.5) <= 1.0);
  REQUIRE(std::abs(counts[1] - 30.3) <= 1.0);
  const auto exact = round_to_counts({0.25, 0.75}, 100);
  REQUIRE(exact[0] == 25);
  REQUIRE(exact[1] == 75);
}

TEST_CASE("mean_field_gap of a trajectory against itself is zero") {
  ModelParams p;
  p.m = 1;
  p.A = {{2.0}};
  p.gamma = {1.0};
  p.lambda_edge = 1.0;
  p = validate_params(std::move(p));
  GroupFractions f;
  f.s = {0.9};
  f.beta = {0.1};
  f.r = {0.0};
  const Trajectory traj = integrate_ode(p, f, 5.0, 0.01);
  REQUIRE(mean_field_gap(traj, traj) == 0.0);
}

TEST_CASE("convergence error vanishes without initial infections") {
  ExperimentBase base = one_group_base();
  base.infected_fractions = {0.0};
  const auto rows =
      convergence_sweep(base, {60}, [](long) { return 5.0; }, 10, 3.0, 21, 200);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].error == 0.0);
}

TEST_CASE("convergence error estimates agree across ensemble sizes") {
  const ExperimentBase base = one_group_base();
  const auto coarse =
      convergence_sweep(base, {80}, [](long) { return 20.0; }, 24, 3.0, 100, 400);
  const auto fine =
      convergence_sweep(base, {80}, [](long) { return 20.0; }, 72, 3.0, 900, 400);
  const double gap = std::abs(coarse[0].error - fine[0].error);
  const double combined = std::sqrt(coarse[0].std_error * coarse[0].std_error +
                                    fine[0].std_error * fine[0].std_error);
  INFO("coarse " << coarse[0].error << " +- " << coarse[0].std_error << ", fine "
                 << fine[0].error << " +- " << fine[0].std_error);
  REQUIRE(gap <= 4.0 * combined);
}

TEST_CASE("converse_gap at t2 = 0 sees only the rounding mismatch") {
  const ExperimentBase base = one_group_base();
  const GapStats stats = converse_gap(base, 1.0, 200, 5, 0.0, 0.0, 31);
  // 0.05 * 200 = 10 infected exactly; no rounding error at all.
  REQUIRE(std::abs(stats.gap[0]) <= 1e-12);
}

TEST_CASE("converse_gap rejects windows without positive ODE mass") {
  ExperimentBase base = one_group_base();
  base.infected_fractions = {0.0};  // w(t) = 0 everywhere
  REQUIRE_THROWS_WITH(converse_gap(base, 1.0, 100, 3, 0.0, 1.0, 7),
                      Catch::Matchers::ContainsSubstring("positive"));
}

TEST_CASE("converse_gap is small in the fast-mixing regime") {
  // lambda = 100 B: Theorem-1 conditions approximately hold.
  const ExperimentBase base = one_group_base();
  const GapStats stats = converse_gap(base, 100.0, 400, 120, 0.5, 2.0, 77);
  INFO("gap " << stats.gap[0] << " z " << stats.z[0]);
  REQUIRE(std::abs(stats.z[0]) < 4.0);
}

TEST_CASE("edge_age_distribution matches the mixed exponential-plus-atom law") {
  ModelParams p;
  p.m = 1;
  p.B = {{0.0}};
  p.rho = {{0.5}};
  p.gamma = {1.0};
  p.lambda_edge = 2.0;
  p.group_sizes = {5};
  p = validate_params(std::move(p));
  const EdgeAgeResult res = edge_age_distribution(p, {0}, 0, 1, 1.0, 2000, 555);
  INFO("KS " << res.ks_stat << " crit " << res.ks_critical << " atom " << res.atom_mass);
  REQUIRE(res.ks_pass);
  REQUIRE(std::abs(res.atom_z) <= 4.0);
  REQUIRE(res.atom_expected == Catch::Approx(std::exp(-2.0)));
}

TEST_CASE("edge_density_check with rho zero sees no edges") {
  ModelParams p;
  p.m = 1;
  p.B = {{1.0}};
  p.rho = {{0.0}};
  p.gamma = {1.0};
  p.lambda_edge = 1.0;
  p.group_sizes = {40};
  p = validate_params(std::move(p));
  const auto cells = edge_density_check(p, {0}, 2.0, 4, 99);
  REQUIRE(cells.size() == 1);
  REQUIRE(cells[0].mean_count == 0.0);
}

TEST_CASE("edge_density_check with certain edges sees the complete graph") {
  ModelParams p;
  p.m = 1;
  p.B = {{0.0}};
  p.rho = {{30.0}};  // rho / n = 1
  p.gamma = {1.0};
  p.lambda_edge = 1.0;
  p.group_sizes = {30};
  p = validate_params(std::move(p));
  const auto cells = edge_density_check(p, {0}, 1.0, 2, 3);
  REQUIRE(cells[0].mean_count == 30.0 * 29.0);
  REQUIRE(cells[0].z == 0.0);
}

TEST_CASE("edge_density_check matches the binomial expectation at two times") {
  ModelParams p;
  p.m = 1;
  p.B = {{0.0}};
  p.rho = {{5.0}};
  p.gamma = {1.0};
  p.lambda_edge = 1.0;
  p.group_sizes = {100};
  p = validate_params(std::move(p));
  for (double t : {0.0, 3.0}) {
    const auto cells = edge_density_check(p, {0}, t, 8, 246);
    INFO("t = " << t << " mean " << cells[0].mean_count << " z " << cells[0].z);
    REQUIRE(cells[0].expected == Catch::Approx(495.0));
    REQUIRE(std::abs(cells[0].z) <= 4.0);
  }
}

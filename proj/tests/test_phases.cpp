#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "agesir/phases.hpp"
#include "agesir/rng.hpp"

using namespace agesir;

namespace {

ModelParams params_with(const Matrix& A, const std::vector<double>& gamma) {
  ModelParams p;
  p.m = static_cast<int>(A.size());
  p.A = A;
  p.gamma = gamma;
  p.lambda_edge = 1.0;
  return validate_params(std::move(p));
}

// A slow-burning two-group epidemic: beta stays well away from zero over the
// full 120-day timeline, which keeps every window's regression identifiable.
const Matrix kBaseA = {{0.12, 0.03}, {0.05, 0.15}};
const std::vector<double> kGamma = {0.06, 0.10};

GroupFractions synthetic_init() {
  GroupFractions f;
  f.s = {0.555, 0.41};
  f.beta = {0.02, 0.015};
  f.r = {0.0, 0.0};
  return f;
}

Matrix scaled(const Matrix& A, double factor) {
  Matrix out = A;
  for (auto& row : out)
    for (double& v : row) v *= factor;
  return out;
}

// Concatenates piecewise-constant-parameter segments into one unit-day series.
Trajectory piecewise_series(const std::vector<std::pair<Matrix, int>>& segments,
                            const GroupFractions& init) {
  Trajectory out;
  GroupFractions state = init;
  int day = 0;
  out.times.push_back(0.0);
  out.states.push_back(state);
  for (const auto& [A, days] : segments) {
    const ModelParams p = params_with(A, kGamma);
    for (int k = 0; k < days; ++k) {
      state = discrete_step(p, state);
      ++day;
      out.times.push_back(static_cast<double>(day));
      out.states.push_back(state);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("solve_constrained with zero radius returns the center") {
  Eigen::MatrixXd C = Eigen::MatrixXd::Random(4, 3);
  Eigen::VectorXd d = Eigen::VectorXd::Random(4);
  Eigen::VectorXd center(3);
  center << 0.5, 0.1, 0.0;
  const NnlsReport rep = solve_constrained(C, d, center, 0.0);
  REQUIRE((rep.x - center).norm() == 0.0);
}

TEST_CASE("solve_constrained with a slack ball matches plain nnls") {
  Rng rng(314);
  Eigen::MatrixXd C(8, 4);
  Eigen::VectorXd d(8);
  for (int r = 0; r < 8; ++r) {
    d[r] = rng.uniform();
    for (int c = 0; c < 4; ++c) C(r, c) = 2.0 * rng.uniform() - 1.0;
  }
  const NnlsReport free = nnls(C, d);
  Eigen::VectorXd center = Eigen::VectorXd::Constant(4, 0.25);
  const double radius = (free.x - center).norm() + 1.0;
  const NnlsReport rep = solve_constrained(C, d, center, radius);
  const double obj_free = (C * free.x - d).squaredNorm();
  const double obj_ball = (C * rep.x - d).squaredNorm();
  REQUIRE(std::abs(obj_ball - obj_free) <= 1e-6);
}

TEST_CASE("solve_constrained matches a dense grid search in two variables") {
  Eigen::MatrixXd C(3, 2);
  C << 1.0, 0.4, -0.3, 0.9, 0.5, 0.5;
  Eigen::VectorXd d(3);
  d << 0.7, -0.2, 0.4;
  Eigen::VectorXd center(2);
  center << 0.3, 0.2;
  const double radius = 0.25;

  double best = 1e100;
  const double step = 1e-3;
  for (double x0 = std::max(0.0, center[0] - radius); x0 <= center[0] + radius; x0 += step) {
    for (double x1 = std::max(0.0, center[1] - radius); x1 <= center[1] + radius; x1 += step) {
      const double dx0 = x0 - center[0];
      const double dx1 = x1 - center[1];
      if (dx0 * dx0 + dx1 * dx1 > radius * radius) continue;
      Eigen::VectorXd x(2);
      x << x0, x1;
      best = std::min(best, (C * x - d).squaredNorm());
    }
  }

  const NnlsReport rep = solve_constrained(C, d, center, radius);
  const double obj = (C * rep.x - d).squaredNorm();
  REQUIRE(obj <= best + 2e-3);
  REQUIRE(obj >= best - 2e-3);
}

TEST_CASE("solve_constrained returns a feasible point") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd C(6, 3);
    Eigen::VectorXd d(6);
    for (int r = 0; r < 6; ++r) {
      d[r] = 2.0 * rng.uniform() - 1.0;
      for (int c = 0; c < 3; ++c) C(r, c) = 2.0 * rng.uniform() - 1.0;
    }
    Eigen::VectorXd center(3);
    center << rng.uniform(), rng.uniform(), rng.uniform();
    const double radius = 0.05 * rng.uniform();
    const NnlsReport rep = solve_constrained(C, d, center, radius);
    REQUIRE((rep.x - center).norm() <= radius * (1.0 + 1e-9));
    REQUIRE(rep.x.minCoeff() >= -1e-12);
  }
}

TEST_CASE("detect_phases finds no boundary in stationary data") {
  const Trajectory data = piecewise_series({{kBaseA, 120}}, synthetic_init());
  PhaseConfig cfg;
  const PhaseSet result = detect_phases(data, cfg);
  REQUIRE(result.boundaries.empty());
  for (const WindowDiagnostics& w : result.windows) REQUIRE_FALSE(w.flagged);
}

TEST_CASE("detect_phases localizes a doubling of the contact rates") {
  const Trajectory data =
      piecewise_series({{kBaseA, 60}, {scaled(kBaseA, 2.0), 60}}, synthetic_init());
  PhaseConfig cfg;
  const PhaseSet result = detect_phases(data, cfg);
  INFO("boundaries found: " << result.boundaries.size());
  for (const WindowDiagnostics& w : result.windows)
    INFO("p=" << w.p << " E_a=" << w.e_unconstrained << " E_b=" << w.e_constrained
              << " ratio=" << w.ratio << (w.flagged ? " *" : ""));
  REQUIRE(result.boundaries.size() == 1);
  REQUIRE(result.boundaries[0] >= 55);
  REQUIRE(result.boundaries[0] <= 65);
}

TEST_CASE("detect_phases raising delta keeps a subset of boundaries") {
  const Trajectory data =
      piecewise_series({{kBaseA, 60}, {scaled(kBaseA, 2.0), 60}}, synthetic_init());
  PhaseConfig low;
  PhaseConfig high;
  high.delta = 1e6;
  const PhaseSet at_low = detect_phases(data, low);
  const PhaseSet at_high = detect_phases(data, high);
  for (int b : at_high.boundaries) {
    bool present = false;
    for (int c : at_low.boundaries) present = present || (b == c);
    REQUIRE(present);
  }
}

TEST_CASE("detect_phases reports one boundary for two changes ten days apart") {
  const Trajectory data = piecewise_series(
      {{kBaseA, 60}, {scaled(kBaseA, 2.0), 10}, {scaled(kBaseA, 3.0), 50}}, synthetic_init());
  PhaseConfig cfg;
  const PhaseSet result = detect_phases(data, cfg);
  for (const WindowDiagnostics& w : result.windows)
    INFO("p=" << w.p << " ratio=" << w.ratio << (w.flagged ? " *" : ""));
  REQUIRE(result.boundaries.size() == 1);
}

TEST_CASE("detect_phases merge pass thins clustered flags") {
  const Trajectory data = piecewise_series(
      {{kBaseA, 60}, {scaled(kBaseA, 2.0), 10}, {scaled(kBaseA, 3.0), 50}}, synthetic_init());
  PhaseConfig cfg;
  cfg.delta = 0.5;  // permissive threshold produces clustered flags
  const PhaseSet result = detect_phases(data, cfg);
  int flagged = 0;
  for (const WindowDiagnostics& w : result.windows) flagged += w.flagged ? 1 : 0;
  REQUIRE(flagged > static_cast<int>(result.boundaries.size()));
  int prev = 0;
  for (int b : result.boundaries) {
    REQUIRE(b - prev > cfg.min_phase);
    prev = b;
    bool was_flagged = false;
    for (const WindowDiagnostics& w : result.windows)
      was_flagged = was_flagged || (w.p == b && w.flagged);
    REQUIRE(was_flagged);
  }
}

TEST_CASE("detect_phases is deterministic") {
  const Trajectory data =
      piecewise_series({{kBaseA, 60}, {scaled(kBaseA, 2.0), 60}}, synthetic_init());
  PhaseConfig cfg;
  const PhaseSet a = detect_phases(data, cfg);
  const PhaseSet b = detect_phases(data, cfg);
  REQUIRE(a.boundaries == b.boundaries);
  REQUIRE(a.windows.size() == b.windows.size());
  for (std::size_t k = 0; k < a.windows.size(); ++k) {
    REQUIRE(a.windows[k].ratio == b.windows[k].ratio);
  }
}

TEST_CASE("detect_phases rejects short data") {
  const Trajectory data = piecewise_series({{kBaseA, 20}}, synthetic_init());
  PhaseConfig cfg;
  REQUIRE_THROWS_WITH(detect_phases(data, cfg), Catch::Matchers::ContainsSubstring("short"));
}

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

#include "agesir/dataio.hpp"

using namespace agesir;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = "agesir_test_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_cumulative_csv parses a small file") {
  TempFile f("date,group_1\n2020-03-10,0\n2020-03-11,1\n2020-03-12,2\n");
  const CumulativeSeries series = load_cumulative_csv(f.path);
  REQUIRE(series.groups() == 1);
  REQUIRE(series.days() == 3);
  REQUIRE(series.counts[0][2] == 2);
}

TEST_CASE("load_cumulative_csv rejects malformed input") {
  SECTION("gap in dates") {
    TempFile f("date,group_1\n2020-03-10,0\n2020-03-12,1\n");
    REQUIRE_THROWS_WITH(load_cumulative_csv(f.path),
                        Catch::Matchers::ContainsSubstring("gap in dates"));
  }
  SECTION("non-integer count") {
    TempFile f("date,group_1\n2020-03-10,3.5\n");
    REQUIRE_THROWS_WITH(load_cumulative_csv(f.path),
                        Catch::Matchers::ContainsSubstring("malformed count"));
  }
  SECTION("negative count") {
    TempFile f("date,group_1\n2020-03-10,-2\n");
    REQUIRE_THROWS_WITH(load_cumulative_csv(f.path),
                        Catch::Matchers::ContainsSubstring("malformed count"));
  }
  SECTION("missing column") {
    TempFile f("date,group_1,group_2\n2020-03-10,1\n");
    REQUIRE_THROWS_WITH(load_cumulative_csv(f.path),
                        Catch::Matchers::ContainsSubstring("missing column"));
  }
  SECTION("month boundary is not a gap") {
    TempFile f("date,group_1\n2020-02-28,0\n2020-02-29,1\n2020-03-01,2\n");
    REQUIRE_NOTHROW(load_cumulative_csv(f.path));
  }
}

TEST_CASE("moving_average basics") {
  SECTION("constant series is unchanged") {
    const auto out = moving_average({4, 4, 4, 4, 4, 4}, 3);
    for (double v : out) REQUIRE(v == Catch::Approx(4.0));
  }
  SECTION("window one is the identity") {
    const auto out = moving_average({1, 5, 2}, 1);
    REQUIRE(out[0] == 1.0);
    REQUIRE(out[1] == 5.0);
    REQUIRE(out[2] == 2.0);
  }
  SECTION("unit impulse spreads to 1/window over the covered days") {
    std::vector<long> impulse(41, 0);
    impulse[20] = 1;
    const auto out = moving_average(impulse, 15);
    for (int k = 0; k < 41; ++k) {
      if (k >= 13 && k <= 27)
        REQUIRE(out[k] == Catch::Approx(1.0 / 15.0));
      else
        REQUIRE(out[k] == 0.0);
    }
  }
  SECTION("even windows are rejected") {
    REQUIRE_THROWS(moving_average({1, 2, 3}, 4));
  }
}

TEST_CASE("decompose_sir splits a constant tail into zero active cases") {
  // Cumulative count constant at c once k >= T_R: I = 0, R = c.
  std::vector<std::vector<double>> totals = {std::vector<double>(40, 25.0)};
  const SirDecomposition out = decompose_sir(totals, {1000}, 14);
  for (int k = 14; k < 40; ++k) {
    REQUIRE(out.infected[0][k] == 0.0);
    REQUIRE(out.recovered[0][k] == 25.0);
  }
}

TEST_CASE("decompose_sir of a unit ramp plateaus at the recovery delay") {
  std::vector<double> ramp(60);
  for (int k = 0; k < 60; ++k) ramp[k] = static_cast<double>(k);
  const SirDecomposition out = decompose_sir({ramp}, {1000}, 14);
  for (int k = 14; k < 60; ++k) REQUIRE(out.infected[0][k] == 14.0);
  for (int k = 0; k < 14; ++k) {
    REQUIRE(out.recovered[0][k] == 0.0);
    REQUIRE(out.infected[0][k] == static_cast<double>(k));
  }
}

TEST_CASE("decompose_sir conserves the population exactly") {
  std::vector<double> series(50);
  for (int k = 0; k < 50; ++k) series[k] = static_cast<double>(k * k % 97);
  // Make it a cumulative (nondecreasing) series.
  for (int k = 1; k < 50; ++k) series[k] = std::max(series[k], series[k - 1]);
  const SirDecomposition out = decompose_sir({series, series}, {500, 700}, 14);
  for (int g = 0; g < 2; ++g) {
    const double pop = g == 0 ? 500.0 : 700.0;
    for (int k = 0; k < 50; ++k) {
      REQUIRE(out.susceptible[g][k] + out.infected[g][k] + out.recovered[g][k] == pop);
    }
  }
  for (const GroupFractions& f : out.fractions.states)
    REQUIRE(std::abs(f.mass() - 1.0) <= 1e-12);
}

TEST_CASE("decompose_sir validates its input") {
  std::vector<std::vector<double>> totals = {std::vector<double>(20, 2000.0)};
  REQUIRE_THROWS_WITH(decompose_sir(totals, {1000}, 14),
                      Catch::Matchers::ContainsSubstring("exceeds population"));
  std::vector<std::vector<double>> shrinking = {std::vector<double>(20, 0.0)};
  for (int k = 0; k < 20; ++k) shrinking[0][k] = 100.0 - 5.0 * k;
  REQUIRE_THROWS_WITH(decompose_sir(shrinking, {1000}, 14),
                      Catch::Matchers::ContainsSubstring("negative active"));
}

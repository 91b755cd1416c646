#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/model.hpp"

namespace agesir {

/// Cumulative case counts per age group on consecutive calendar days.
/// populations are filled from configuration, not from the CSV.
struct CumulativeSeries {
  std::vector<std::string> dates;           // ISO dates, gapless
  std::vector<std::vector<long>> counts;    // [group][day]
  std::vector<long> populations;            // per group

  int groups() const { return static_cast<int>(counts.size()); }
  int days() const { return counts.empty() ? 0 : static_cast<int>(counts.front().size()); }
};

namespace detail {

// Days since the civil epoch; standard Gregorian day-count arithmetic.
inline long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

inline long parse_iso_date(const std::string& text, int line_no) {
  int y, m, d;
  char dash1, dash2;
  std::istringstream in(text);
  if (!(in >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-' || m < 1 ||
      m > 12 || d < 1 || d > 31)
    throw std::invalid_argument("line " + std::to_string(line_no) + ": malformed date '" +
                                text + "'");
  return days_from_civil(y, m, d);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace detail

/// Loads a `date,group_1,...,group_m` CSV of cumulative counts and verifies
/// that the dates are consecutive and the counts are nonnegative integers.
inline CumulativeSeries load_cumulative_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty file '" + path + "'");
  const auto header = detail::split_csv(line);
  if (header.size() < 2 || header[0] != "date")
    throw std::invalid_argument("line 1: expected header date,group_1,...");
  const int m = static_cast<int>(header.size()) - 1;

  CumulativeSeries series;
  series.counts.assign(m, {});
  long prev_day = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (static_cast<int>(cells.size()) != m + 1)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": missing column");
    const long day = detail::parse_iso_date(cells[0], line_no);
    if (!series.dates.empty() && day != prev_day + 1)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": gap in dates");
    prev_day = day;
    series.dates.push_back(cells[0]);
    for (int g = 0; g < m; ++g) {
      const std::string& cell = cells[g + 1];
      if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("line " + std::to_string(line_no) + ": malformed count '" +
                                    cell + "'");
      series.counts[g].push_back(std::stol(cell));
    }
  }
  if (series.dates.empty()) throw std::invalid_argument("no data rows in '" + path + "'");
  return series;
}

/// Centered moving average with truncated boundaries: each output day
/// averages the input over the window days that actually exist.
inline std::vector<double> moving_average(const std::vector<long>& series, int window = 15) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("window must be odd and >= 1");
  const int half = window / 2;
  const int days = static_cast<int>(series.size());
  std::vector<double> out(days, 0.0);
  for (int k = 0; k < days; ++k) {
    const int lo = std::max(0, k - half);
    const int hi = std::min(days - 1, k + half);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += static_cast<double>(series[j]);
    out[k] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Per-group absolute S/I/R counts recovered from smoothed cumulative totals
/// under a fixed recovery delay.
struct SirDecomposition {
  std::vector<std::vector<double>> susceptible;  // [group][day]
  std::vector<std::vector<double>> infected;
  std::vector<std::vector<double>> recovered;
  Trajectory fractions;
};

/// Splits smoothed cumulative totals into S/I/R using a fixed recovery time:
/// everyone infected recovers exactly recovery_days later, and cumulative
/// counts before the record start are taken as zero. The per-day identity
/// S + I + R == population holds by construction.
inline SirDecomposition decompose_sir(const std::vector<std::vector<double>>& smoothed_totals,
                                      const std::vector<long>& populations,
                                      int recovery_days = 14) {
  const int m = static_cast<int>(smoothed_totals.size());
  if (m == 0) throw std::invalid_argument("no groups");
  if (static_cast<int>(populations.size()) != m)
    throw std::invalid_argument("populations: dimension mismatch");
  const int days = static_cast<int>(smoothed_totals.front().size());
  if (days < recovery_days) throw std::invalid_argument("series shorter than the recovery time");

  long total_pop = 0;
  for (long p : populations) total_pop += p;

  SirDecomposition out;
  out.susceptible.assign(m, std::vector<double>(days, 0.0));
  out.infected.assign(m, std::vector<double>(days, 0.0));
  out.recovered.assign(m, std::vector<double>(days, 0.0));

  for (int g = 0; g < m; ++g) {
    if (static_cast<int>(smoothed_totals[g].size()) != days)
      throw std::invalid_argument("ragged smoothed series");
    for (int k = 0; k < days; ++k) {
      const double cum = smoothed_totals[g][k];
      if (cum > static_cast<double>(populations[g]))
        throw std::invalid_argument("cumulative count exceeds population");
      const double lagged = (k >= recovery_days) ? smoothed_totals[g][k - recovery_days] : 0.0;
      const double active = cum - lagged;
      if (active < -1e-9) throw std::invalid_argument("negative active count; corrupt input");
      out.recovered[g][k] = lagged;
      out.infected[g][k] = std::max(active, 0.0);
      out.susceptible[g][k] = static_cast<double>(populations[g]) - cum;
    }
  }

  out.fractions.times.resize(days);
  out.fractions.states.resize(days);
  const double inv = 1.0 / static_cast<double>(total_pop);
  for (int k = 0; k < days; ++k) {
    GroupFractions f;
    f.s.resize(m);
    f.beta.resize(m);
    f.r.resize(m);
    for (int g = 0; g < m; ++g) {
      f.s[g] = out.susceptible[g][k] * inv;
      f.beta[g] = out.infected[g][k] * inv;
      f.r[g] = out.recovered[g][k] * inv;
    }
    out.fractions.times[k] = static_cast<double>(k);
    out.fractions.states[k] = std::move(f);
  }
  return out;
}

}  // namespace agesir

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "agesir/rng.hpp"

namespace agesir {

inline double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

inline double variance_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(xs.size() - 1);
}

inline double stderr_of(const std::vector<double>& xs) {
  return std::sqrt(variance_of(xs) / static_cast<double>(xs.size()));
}

/// One-sample Kolmogorov-Smirnov statistic against an arbitrary CDF. For
/// distributions with atoms, pass the left limit of the CDF separately so the
/// jump is compared on both sides; for continuous laws the default is right.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left = nullptr) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    const double v = samples[i];
    const double f_right = cdf(v);
    const double f_left = cdf_left ? cdf_left(v) : f_right;
    worst = std::max(worst, std::abs(static_cast<double>(j) / n - f_right));
    worst = std::max(worst, std::abs(static_cast<double>(i) / n - f_left));
    i = j;
  }
  return worst;
}

/// Two-sample Kolmogorov-Smirnov statistic (ties handled by comparing the
/// two empirical CDFs at every pooled point).
inline double ks_two_sample(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty()) throw std::invalid_argument("ks_two_sample: no samples");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  double worst = 0.0;
  std::size_t i = 0, j = 0;
  while (i < xs.size() && j < ys.size()) {
    const double v = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] <= v) ++i;
    while (j < ys.size() && ys[j] <= v) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return worst;
}

/// Asymptotic Kolmogorov critical coefficient at the 1% level.
inline constexpr double kKolmogorov1pct = 1.6276;

inline double ks_critical_one_sample_1pct(std::size_t n) {
  return kKolmogorov1pct / std::sqrt(static_cast<double>(n));
}

inline double ks_critical_two_sample_1pct(std::size_t n1, std::size_t n2) {
  const double inv = 1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2);
  return kKolmogorov1pct * std::sqrt(inv);
}

/// Bootstrap standard error of an arbitrary statistic of the sample rows.
/// resamples are drawn with a dedicated seed so results are reproducible.
inline double bootstrap_stderr(std::size_t rows,
                               const std::function<double(const std::vector<std::size_t>&)>& stat,
                               int resamples = 1000, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<std::size_t> pick(rows);
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t k = 0; k < rows; ++k)
      pick[k] = static_cast<std::size_t>(rng.below(rows));
    values.push_back(stat(pick));
  }
  return std::sqrt(variance_of(values));
}

}  // namespace agesir

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stochcoll {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Sample mean with the standard error of independent draws.
MeanSe iid_mean_se(std::span<const double> x);

/// Sample mean with a batch-means standard error. Falls back to the iid
/// estimate when there are fewer than two samples per batch.
MeanSe batch_mean_se(std::span<const double> x, int batches = 16);

double mean(std::span<const double> x);

/// Unbiased sample covariance.
double covariance(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of two equally long series.
double pearson(std::span<const double> x, std::span<const double> y);

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf);

/// Asymptotic critical value of the one-sample KS statistic.
/// `alpha` must be one of 0.10, 0.05, 0.01, 0.001.
double ks_critical_value(std::size_t n, double alpha);

}  // namespace stochcoll

#include <algorithm>

template <typename Cdf>
double stochcoll::ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

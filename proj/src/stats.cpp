#include "stochcoll/stats.hpp"

#include "stochcoll/common.hpp"

#include <cmath>
#include <limits>

namespace stochcoll {

double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("mean: empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

MeanSe iid_mean_se(std::span<const double> x) {
  const double m = mean(x);
  if (x.size() < 2) return {m, std::numeric_limits<double>::infinity()};
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double n = static_cast<double>(x.size());
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

MeanSe batch_mean_se(std::span<const double> x, int batches) {
  if (batches < 2 || x.size() < static_cast<std::size_t>(2 * batches)) return iid_mean_se(x);
  const std::size_t per = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    means[static_cast<std::size_t>(b)] = mean(x.subspan(static_cast<std::size_t>(b) * per, per));
  }
  // The overall mean uses every sample; the spread comes from the batches.
  return {mean(x), iid_mean_se(means).se};
}

double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("covariance: need two equal series of length >= 2");
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double sxy = covariance(x, y);
  const double sxx = covariance(x, x);
  const double syy = covariance(y, y);
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double ks_critical_value(std::size_t n, double alpha) {
  // Limiting Kolmogorov distribution quantiles.
  double c = 0.0;
  if (alpha == 0.10) c = 1.2238;
  else if (alpha == 0.05) c = 1.3581;
  else if (alpha == 0.01) c = 1.6276;
  else if (alpha == 0.001) c = 1.9495;
  else throw InvalidArgument("ks_critical_value: unsupported alpha");
  return c / std::sqrt(static_cast<double>(n));
}

}  // namespace stochcoll

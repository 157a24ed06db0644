#include "branchlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "branchlab/errors.hpp"

namespace branchlab {

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) throw_error(ErrorCode::PreconditionViolated, "empty sample");
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw_error(ErrorCode::PreconditionViolated, "need >= 2 samples");
  const double m = sample_mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

double sample_stderr(const std::vector<double>& xs) {
  return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

double sample_median(std::vector<double> xs) {
  if (xs.empty()) throw_error(ErrorCode::PreconditionViolated, "empty sample");
  const std::size_t n = xs.size();
  std::sort(xs.begin(), xs.end());
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double sample_iqr(std::vector<double> xs) {
  if (xs.size() < 4) throw_error(ErrorCode::PreconditionViolated, "need >= 4 samples");
  std::sort(xs.begin(), xs.end());
  auto quantile = [&](double q) {
    const double pos = q * (xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - lo;
    return lo + 1 < xs.size() ? xs[lo] * (1.0 - frac) + xs[lo + 1] * frac : xs[lo];
  };
  return quantile(0.75) - quantile(0.25);
}

double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw_error(ErrorCode::PreconditionViolated, "correlation needs two equal samples");
  const double mx = sample_mean(xs), my = sample_mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_statistic_normal(std::vector<double> zs) {
  if (zs.empty()) throw_error(ErrorCode::PreconditionViolated, "empty sample");
  std::sort(zs.begin(), zs.end());
  const double n = static_cast<double>(zs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double cdf = normal_cdf(zs[i]);
    d = std::max(d, std::max((i + 1) / n - cdf, cdf - i / n));
  }
  return d;
}

double ks_pvalue(double statistic, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace branchlab

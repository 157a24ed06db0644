#pragma once

#include <vector>

namespace branchlab {

double sample_mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);  // unbiased
double sample_stderr(const std::vector<double>& xs);
double sample_median(std::vector<double> xs);
double sample_iqr(std::vector<double> xs);
double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys);

double normal_cdf(double z);

/// One-sample Kolmogorov-Smirnov statistic against the standard normal.
double ks_statistic_normal(std::vector<double> zs);

/// Asymptotic two-sided KS p-value with the finite-sample size correction
/// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D.
double ks_pvalue(double statistic, std::size_t n);

}  // namespace branchlab

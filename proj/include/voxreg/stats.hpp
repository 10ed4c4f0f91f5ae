#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace vxr::stats {

double normal_cdf(double x);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double reg_incomplete_beta(double a, double b, double x);

double student_t_cdf(double x, double df);

// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
// Sorts a copy of the sample internally.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

// Asymptotic two-sided KS p-value with Stephens' small-sample adjustment.
double ks_pvalue(double statistic, std::size_t n);

// Ranks 1..n in ascending order of value; ties share the mean of tied ranks.
std::vector<double> ranks_mean_ties(const std::vector<double>& values);

// Spearman rank correlation; entries where either input is NaN are dropped.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

double binomial_pmf(int n, int k, double p);

// Two-sided exact sign test p-value for `wins` out of `wins + losses` (ties excluded).
double sign_test_pvalue(int wins, int losses);

// Central interval [lo, hi] of counts for Binomial(n, p) with >= coverage mass,
// grown symmetrically in probability from the tails.
std::pair<int, int> binomial_central_interval(int n, double p, double coverage);

double lag1_autocorrelation(const std::vector<double>& series);

// Standard error of the mean of a correlated series by the batch-means method.
double batch_means_se(const std::vector<double>& series);

double mean(const std::vector<double>& values);
double median(std::vector<double> values);

}  // namespace vxr::stats

#include "voxreg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxreg/errors.hpp"

namespace vxr::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Lentz continued fraction for the incomplete beta.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double x, double df) {
  if (df <= 0.0) fail_validation("invalid-parameter", "t cdf requires df > 0");
  if (x == 0.0) return 0.5;
  const double z = df / (df + x * x);
  const double p = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, z);
  return x > 0.0 ? 1.0 - p : p;
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) fail_validation("invalid-parameter", "ks_statistic on empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double ks_pvalue(double statistic, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

std::vector<double> ranks_mean_ties(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail_validation("invalid-parameter", "spearman size mismatch");
  std::vector<double> xa, xb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    xa.push_back(a[i]);
    xb.push_back(b[i]);
  }
  const std::size_t n = xa.size();
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  const auto ra = ranks_mean_ties(xa);
  const auto rb = ranks_mean_ties(xb);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    sxy += da * db;
    sxx += da * da;
    syy += db * db;
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double binomial_pmf(int n, int k, double p) {
  if (k < 0 || k > n) return 0.0;
  const double ln = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                    k * std::log(p) + (n - k) * std::log1p(-p);
  return std::exp(ln);
}

double sign_test_pvalue(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) tail += binomial_pmf(n, i, 0.5);
  return std::min(1.0, 2.0 * tail);
}

std::pair<int, int> binomial_central_interval(int n, double p, double coverage) {
  std::vector<double> pmf(n + 1);
  for (int k = 0; k <= n; ++k) pmf[k] = binomial_pmf(n, k, p);
  const double alpha = 0.5 * (1.0 - coverage);
  int lo = 0;
  double mass = 0.0;
  while (lo < n && mass + pmf[lo] <= alpha) mass += pmf[lo++];
  int hi = n;
  mass = 0.0;
  while (hi > 0 && mass + pmf[hi] <= alpha) mass += pmf[hi--];
  return {lo, hi};
}

double lag1_autocorrelation(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(series);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = series[i] - m;
    den += d * d;
    if (i + 1 < n) num += d * (series[i + 1] - m);
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

double batch_means_se(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t batches = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))));
  const std::size_t len = n / batches;
  std::vector<double> batch_means;
  batch_means.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += series[i];
    batch_means.push_back(s / static_cast<double>(len));
  }
  const double m = mean(batch_means);
  double var = 0.0;
  for (const double bm : batch_means) var += (bm - m) * (bm - m);
  var /= static_cast<double>(batch_means.size() - 1);
  return std::sqrt(var / static_cast<double>(batch_means.size()));
}

double mean(const std::vector<double>& values) {
  double s = 0.0;
  for (const double v : values) s += v;
  return values.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace vxr::stats

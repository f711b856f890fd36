#include "rsd/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rsd {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

// Acklam's rational approximation for the normal quantile (~1e-9 relative),
// used as the seed for one Halley refinement against erfc.
double quantile_seed(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0,1)");
  // Work in the lower tail, where the erfc-based CDF keeps full relative
  // precision; 1 - p is exact for p >= 0.5.
  if (p > 0.5) return -normal_quantile(1.0 - p);
  double x = quantile_seed(p);
  // Halley step: e = Phi(x) - p, u = e * sqrt(2*pi) * exp(x^2/2). Skipped in
  // the far tail where exp overflows; the seed is already ~1e-9 relative.
  if (0.5 * x * x < 700.0) {
    const double e = normal_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double wmw_midrank_z(std::span<const double> row_a, std::span<const double> row_b) {
  if (row_a.size() != row_b.size())
    throw std::invalid_argument("wmw_midrank_z: rows have different cell counts");
  if (row_a.empty()) throw std::invalid_argument("wmw_midrank_z: empty rows");

  double m = 0.0, n = 0.0;
  for (double c : row_a) {
    if (c < 0.0) throw std::invalid_argument("wmw_midrank_z: negative cell count");
    m += c;
  }
  for (double c : row_b) {
    if (c < 0.0) throw std::invalid_argument("wmw_midrank_z: negative cell count");
    n += c;
  }
  if (m <= 0.0 || n <= 0.0) throw std::invalid_argument("wmw_midrank_z: degenerate sample");

  const double total = m + n;
  double cum = 0.0;  // pooled count through the previous cell
  double w = 0.0;    // midrank sum of row_b
  for (size_t l = 0; l < row_a.size(); ++l) {
    const double pooled = row_a[l] + row_b[l];
    const double midrank = cum + (pooled + 1.0) / 2.0;
    w += row_b[l] * midrank;
    cum += pooled;
  }
  const double expect = n * (total + 1.0) / 2.0;
  const double variance = m * n * (total + 1.0) / 12.0;
  return (w - expect) / std::sqrt(variance);
}

double normal_h(std::span<const double> mean_a, double n_a, std::span<const double> mean_b,
                double n_b, Sidedness sided) {
  if (mean_a.size() != mean_b.size())
    throw std::invalid_argument("normal_h: dimension mismatch");
  if (mean_a.empty()) throw std::invalid_argument("normal_h: empty mean vectors");
  if (n_a <= 0.0 || n_b <= 0.0) throw std::invalid_argument("normal_h: group counts must be positive");

  const double tau2 = 1.0 / n_a + 1.0 / n_b;
  if (mean_a.size() == 1) {
    const double diff = mean_b[0] - mean_a[0];
    const double z = diff / std::sqrt(tau2);
    return sided == Sidedness::one_sided ? z : std::fabs(z);
  }
  if (sided == Sidedness::one_sided)
    throw std::invalid_argument("normal_h: one-sided form is defined only for q = 1");
  double ss = 0.0;
  for (size_t l = 0; l < mean_a.size(); ++l) {
    const double d = mean_a[l] - mean_b[l];
    ss += d * d;
  }
  return ss / tau2;
}

double chisq_pair_stat(std::span<const double> x_i, std::span<const double> x_j) {
  if (x_i.size() != x_j.size()) throw std::invalid_argument("chisq_pair_stat: dimension mismatch");
  if (x_i.empty()) throw std::invalid_argument("chisq_pair_stat: empty vectors");
  double ss = 0.0;
  for (size_t l = 0; l < x_i.size(); ++l) {
    const double d = x_i[l] - x_j[l];
    ss += d * d;
  }
  return ss / 2.0;
}

double rank_w_default(int k, int n) {
  return static_cast<double>(k) * (static_cast<double>(k) * n + 1.0);
}

double rank_h(const std::vector<int>& group_a, const std::vector<int>& group_b,
              std::span<const double> rank_sums, int n, int k, Sidedness sided,
              double w_override) {
  if (group_a.empty() || group_b.empty()) throw std::invalid_argument("rank_h: empty group");
  for (int i : group_a)
    if (std::find(group_b.begin(), group_b.end(), i) != group_b.end())
      throw std::invalid_argument("rank_h: groups overlap");
  if (n < 1 || k < 2) throw std::invalid_argument("rank_h: need n >= 1 and k >= 2");

  auto group_sum = [&](const std::vector<int>& g) {
    double y = 0.0;
    for (int i : g) y += rank_sums[static_cast<size_t>(i)];
    return y;
  };
  const double y_a = group_sum(group_a);
  const double y_b = group_sum(group_b);
  const double n_a = static_cast<double>(n) * static_cast<double>(group_a.size());
  const double n_b = static_cast<double>(n) * static_cast<double>(group_b.size());
  const double w = w_override > 0.0 ? w_override : rank_w_default(k, n);
  const double sigma = std::sqrt(w * (1.0 / n_a + 1.0 / n_b) / 12.0);
  const double h = (y_a / n_a - y_b / n_b) / sigma;
  return sided == Sidedness::two_sided ? std::fabs(h) : h;
}

CriticalValues critical_values_bh(int K, double alpha) {
  if (K < 1) throw std::invalid_argument("critical_values_bh: K must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("critical_values_bh: alpha must be in (0,1)");
  CriticalValues cv;
  cv.source = "bh";
  cv.alpha = alpha;
  cv.values.reserve(static_cast<size_t>(K));
  for (int i = 1; i <= K; ++i)
    cv.values.push_back(normal_quantile(1.0 - (K + 1 - i) * (alpha / 2.0) / K));
  cv.validate();
  return cv;
}

CriticalValues critical_values_bg(int K, double alpha) {
  if (K < 1) throw std::invalid_argument("critical_values_bg: K must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("critical_values_bg: alpha must be in (0,1)");
  CriticalValues cv;
  cv.source = "bg";
  cv.alpha = alpha;
  cv.values.reserve(static_cast<size_t>(K));
  // The printed constants decrease in i; emit C_m at i = K+1-m so the list
  // increases.
  for (int m = 1; m <= K; ++m) {
    const int i = K + 1 - m;
    const double tail = i * (alpha / 2.0) / (K + 1.0 - i * (1.0 - alpha / 2.0));
    cv.values.push_back(normal_quantile(1.0 - tail));
  }
  cv.validate();
  return cv;
}

}  // namespace rsd

#ifndef RSD_STATISTICS_HPP
#define RSD_STATISTICS_HPP

#include <span>
#include <vector>

#include "rsd/types.hpp"

namespace rsd {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, accurate to better than 1e-12 absolute on
/// (1e-300, 1 - 1e-12). Throws std::invalid_argument outside (0, 1).
double normal_quantile(double p);

/// Wilcoxon-Mann-Whitney midrank Z for a 2 x q table given as two cell-count
/// rows. W is the midrank sum of row_b in the pooled table; the midrank of
/// cell l is (pooled count through cell l-1) + (pooled count in cell l + 1)/2.
/// Z > 0 indicates row_b stochastically larger. Fractional counts are fine.
double wmw_midrank_z(std::span<const double> row_a, std::span<const double> row_b);

/// Pooled-group mean-difference statistic. For q = 1 this is
/// (b - a)/sqrt(1/n_a + 1/n_b), signed when one-sided and absolute when
/// two-sided. For q > 1 it is the quadratic form
/// (a - b)'(a - b)/(1/n_a + 1/n_b), which is chi-squared with q degrees of
/// freedom under equality; only the two-sided form exists there.
double normal_h(std::span<const double> mean_a, double n_a, std::span<const double> mean_b,
                double n_b, Sidedness sided);

/// (x_i - x_j)'(x_i - x_j)/2.
double chisq_pair_stat(std::span<const double> x_i, std::span<const double> x_j);

/// Joint-rank pooled-group statistic
///   (Y(A)/N(A) - Y(B)/N(B)) / sigma_{A,B},
/// where rank_sums holds the total joint-rank sum of each population,
/// Y(A) sums them over A, N(A) = n * |A|, and
/// sigma^2_{A,B} = w (1/N(A) + 1/N(B)) / 12 with w = k(kn + 1) by default.
/// Two-sided takes the absolute value. Pass w_override > 0 to replace w.
double rank_h(const std::vector<int>& group_a, const std::vector<int>& group_b,
              std::span<const double> rank_sums, int n, int k, Sidedness sided,
              double w_override = 0.0);

/// Default joint-rank variance scale w = k(kn + 1).
double rank_w_default(int k, int n);

/// Step-up constants C_i = Phi^-1(1 - (K+1-i)(alpha/2)/K), already increasing.
CriticalValues critical_values_bh(int K, double alpha);

/// Step-down constants Phi^-1(1 - i(alpha/2)/(K+1-i(1-alpha/2))), reindexed
/// so the returned list is increasing (the printed form decreases in i).
CriticalValues critical_values_bg(int K, double alpha);

}  // namespace rsd

#endif  // RSD_STATISTICS_HPP

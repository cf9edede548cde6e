#pragma once

#include <cstddef>
#include <vector>

namespace tgt::stats {

struct CorrelationResult {
  double rho = 0.0;      // spearman rho or pearson r
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
  bool defined = true;   // false when either series has zero variance
};

// Average ranks for ties, Pearson on ranks, two-sided p from
// t = rho*sqrt((n-2)/(1-rho^2)) against Student's t with n-2 dof.
CorrelationResult spearman(const std::vector<double>& xs, const std::vector<double>& ys);

CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Exact two-sided permutation p-value (enumerates all n! orderings of ys);
// n must be <= 10.
double spearman_permutation_p(const std::vector<double>& xs, const std::vector<double>& ys);

std::vector<double> average_ranks(const std::vector<double>& values);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Two-sided tail of Student's t with nu degrees of freedom.
double student_t_two_sided_p(double t, double nu);

}  // namespace tgt::stats

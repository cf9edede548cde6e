#include "tgt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tgt/errors.hpp"

namespace tgt::stats {

namespace {

// Lentz's continued fraction for the incomplete beta (Numerical Recipes betacf).
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

bool all_equal(const std::vector<double>& values) {
  for (double v : values)
    if (v != values.front()) return false;
  return true;
}

double pearson_raw(const std::vector<double>& xs, const std::vector<double>& ys, bool& defined) {
  // Constant series first: rounding in the mean can leave ~1e-32 of phantom
  // variance that would otherwise pass the check below.
  if (all_equal(xs) || all_equal(ys)) {
    defined = false;
    return 0.0;
  }
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    defined = false;
    return 0.0;
  }
  defined = true;
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

void check_series(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw LengthMismatch("series lengths differ: " + std::to_string(xs.size()) + " vs " +
                         std::to_string(ys.size()));
  if (xs.size() < 3)
    throw TooFewSamples("need n >= 3, got " + std::to_string(xs.size()));
}

CorrelationResult with_p_value(double rho, bool defined, std::size_t n) {
  CorrelationResult out;
  out.rho = rho;
  out.n = n;
  out.defined = defined;
  if (!defined) {
    out.rho = std::numeric_limits<double>::quiet_NaN();
    out.p_value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double nu = static_cast<double>(n) - 2.0;
  if (std::fabs(rho) >= 1.0) {
    out.p_value = 0.0;
    return out;
  }
  const double t = rho * std::sqrt(nu / (1.0 - rho * rho));
  out.p_value = student_t_two_sided_p(t, nu);
  return out;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log(1.0 - x));
  // Symmetry keeps the continued fraction in its fast-converging regime.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double nu) {
  if (nu <= 0.0) return 1.0;
  const double x = nu / (nu + t * t);
  return incomplete_beta(nu / 2.0, 0.5, x);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_series(xs, ys);
  bool defined = false;
  const double r = pearson_raw(xs, ys, defined);
  return with_p_value(r, defined, xs.size());
}

CorrelationResult spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_series(xs, ys);
  bool defined = false;
  const double rho = pearson_raw(average_ranks(xs), average_ranks(ys), defined);
  return with_p_value(rho, defined, xs.size());
}

double spearman_permutation_p(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_series(xs, ys);
  if (xs.size() > 10) throw Error("permutation p-value limited to n <= 10");
  bool defined = false;
  const auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  const double observed = std::fabs(pearson_raw(rx, ry, defined));
  if (!defined) return std::numeric_limits<double>::quiet_NaN();

  std::sort(ry.begin(), ry.end());
  long total = 0;
  long at_least = 0;
  do {
    ++total;
    bool def = false;
    const double rho = std::fabs(pearson_raw(rx, ry, def));
    if (def && rho >= observed - 1e-12) ++at_least;
  } while (std::next_permutation(ry.begin(), ry.end()));
  return static_cast<double>(at_least) / static_cast<double>(total);
}

}  // namespace tgt::stats

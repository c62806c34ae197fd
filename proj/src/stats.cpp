#include "qsteer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsteer {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double standard_error(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("standard_error: empty sample");
  return sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

double skewness(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("skewness: empty sample");
  const double m = mean(xs);
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(xs.size());
  m3 /= static_cast<double>(xs.size());
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double sign_test_p_greater(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  // Exact binomial tail via log binomial coefficients.
  const double log_half_n = n * std::log(0.5);
  double p = 0.0;
  for (int i = wins; i <= n; ++i) {
    const double log_comb =
        std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    p += std::exp(log_comb + log_half_n);
  }
  return std::min(1.0, p);
}

double mann_whitney_p_greater(const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  const std::size_t n1 = xs.size();
  const std::size_t n2 = ys.size();
  if (n1 == 0 || n2 == 0)
    throw std::invalid_argument("mann_whitney: empty sample");

  struct Tagged {
    double value;
    bool from_x;
  };
  std::vector<Tagged> all;
  all.reserve(n1 + n2);
  for (double v : xs) all.push_back({v, true});
  for (double v : ys) all.push_back({v, false});
  std::sort(all.begin(), all.end(),
            [](const Tagged& a, const Tagged& b) { return a.value < b.value; });

  // Average ranks within tie groups; accumulate the tie correction term.
  const std::size_t n = all.size();
  double rank_sum_x = 0.0;
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && all[j + 1].value == all[i].value) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k)
      if (all[k].from_x) rank_sum_x += avg_rank;
    i = j + 1;
  }

  const double u1 = rank_sum_x - 0.5 * n1 * (n1 + 1.0);
  const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
  const double nn = static_cast<double>(n);
  const double sigma2 = (static_cast<double>(n1) * static_cast<double>(n2) / 12.0) *
                        ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (sigma2 <= 0.0) return 1.0;
  const double z = (u1 - mu - 0.5) / std::sqrt(sigma2);
  return 1.0 - normal_cdf(z);
}

}  // namespace qsteer

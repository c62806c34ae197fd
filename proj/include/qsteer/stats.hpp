#pragma once

#include <vector>

namespace qsteer {

double mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);
double standard_error(const std::vector<double>& xs);

// Sample skewness g1 = m3 / m2^(3/2); 0 when the variance vanishes.
double skewness(const std::vector<double>& xs);

double normal_cdf(double x);

// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
// Ties must be dropped by the caller.
double sign_test_p_greater(int wins, int losses);

// One-sided Mann-Whitney U test of H1: xs stochastically greater than ys.
// Normal approximation with tie correction and continuity correction.
double mann_whitney_p_greater(const std::vector<double>& xs,
                              const std::vector<double>& ys);

}  // namespace qsteer

#pragma once

#include <vector>

#include "defaultlab/models.hpp"

namespace defaultlab {

/// Tail summary at confidence alpha. es is the conditional tail mean
/// E[L | L >= VaR], not the interpolated coherent variant.
struct RiskReport {
  double alpha = 0.0;
  int var = 0;
  double es = 0.0;
};

/// S(h) = P(L >= h) for h = 0..n, accumulated from the top.
std::vector<double> survival(const CountDistribution& dist);
std::vector<double> cdf(const CountDistribution& dist);

/// Smallest h with P(L <= h) >= alpha - 1e-12.
int value_at_risk(const CountDistribution& dist, double alpha);
double expected_shortfall(const CountDistribution& dist, double alpha);
RiskReport risk_report(const CountDistribution& dist, double alpha);

}  // namespace defaultlab

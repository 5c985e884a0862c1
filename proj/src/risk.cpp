#include "defaultlab/risk.hpp"

#include <algorithm>

namespace defaultlab {

namespace {

constexpr double kCdfSlack = 1e-12;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

}  // namespace

std::vector<double> survival(const CountDistribution& dist) {
  const int n = dist.n();
  std::vector<double> s(n + 1);
  double acc = 0.0;
  for (int h = n; h >= 0; --h) {
    acc += dist.pmf(h);
    s[h] = acc;
  }
  // Mass is normalized; pin S(0) against accumulated roundoff.
  s[0] = 1.0;
  for (int h = 1; h <= n; ++h) s[h] = std::min(s[h], s[h - 1]);
  return s;
}

std::vector<double> cdf(const CountDistribution& dist) {
  const int n = dist.n();
  std::vector<double> c(n + 1);
  double acc = 0.0;
  for (int h = 0; h <= n; ++h) {
    acc += dist.pmf(h);
    c[h] = std::min(acc, 1.0);
  }
  c[n] = 1.0;
  return c;
}

int value_at_risk(const CountDistribution& dist, double alpha) {
  check_alpha(alpha);
  // CDF(h) = 1 - S(h+1); the upper-tail sum keeps small tail masses exact.
  const std::vector<double> s = survival(dist);
  const int n = dist.n();
  for (int h = 0; h < n; ++h)
    if (1.0 - s[h + 1] >= alpha - kCdfSlack) return h;
  return n;
}

double expected_shortfall(const CountDistribution& dist, double alpha) {
  const int var = value_at_risk(dist, alpha);
  double mass = 0.0, first = 0.0;
  for (int h = var; h <= dist.n(); ++h) {
    const double w = dist.pmf(h);
    mass += w;
    first += h * w;
  }
  if (!(mass > 0.0)) throw NumericalError("expected_shortfall: empty tail");
  return first / mass;
}

RiskReport risk_report(const CountDistribution& dist, double alpha) {
  return {alpha, value_at_risk(dist, alpha), expected_shortfall(dist, alpha)};
}

}  // namespace defaultlab

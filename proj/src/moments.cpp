#include "defaultlab/moments.hpp"

#include <cmath>

namespace defaultlab {

MomentSummary make_summary(double m, double p11) {
  MomentSummary s{m, p11, 0.0, false};
  if (m > 0.0 && m < 1.0) {
    s.rho = (p11 - m * m) / (m * (1.0 - m));
  } else {
    s.degenerate = true;
  }
  return s;
}

MomentSummary davis_lo_moments(const DavisLo& params, int n) {
  if (n < 2) throw DomainError("davis_lo_moments: n must be >= 2");
  validate(params);
  const double p = params.p, q = params.q;
  const double pq = p * q;
  const double m = p - (1.0 - p) * std::expm1((n - 1) * std::log1p(-pq));
  // (1-2pq+pq^2)^(n-2) - (1-pq)^(2(n-1)), differenced in log space.
  const double a = (n - 2) * std::log1p(-2.0 * pq + pq * q);
  const double b = 2.0 * (n - 1) * std::log1p(-pq);
  const double cov = (1.0 - p) * (1.0 - p) * std::exp(b) * std::expm1(a - b);
  return make_summary(m, cov + m * m);
}

MomentSummary torri_moments(const Torri& params, int n) {
  if (n < 2) throw DomainError("torri_moments: n must be >= 2");
  validate(params);
  const double p = params.p, u = params.u, v = params.v;
  const double l1mpv = std::log1p(-p * v);
  const double pi_nm1 = -std::expm1((n - 1) * l1mpv);
  const double m = p + (1.0 - p) * (1.0 - u) * pi_nm1;
  const double mixed = -std::expm1(std::log1p(-v) + (n - 2) * l1mpv);
  const double both = -std::expm1((n - 2) * l1mpv);
  const double p11 = p * p + 2.0 * p * (1.0 - p) * (1.0 - u) * mixed +
                     (1.0 - p) * (1.0 - p) * (1.0 - u) * (1.0 - u) * both;
  return make_summary(m, p11);
}

MomentSummary vasicek_moments(const Vasicek& params, const QuadratureOptions& opts) {
  validate(params);
  const double p = params.p;
  if (p == 0.0 || p == 1.0 || params.rho_a == 0.0) return make_summary(p, p * p);
  const double a = std_normal_quantile(p) / std::sqrt(1.0 - params.rho_a);
  const double s = std::sqrt(params.rho_a / (1.0 - params.rho_a));
  auto sq = [](double z) { return std::pow(std_normal_cdf(z), 2); };
  const double p11 = probit_mixture_rule(a, s, 1, opts.resolution).integrate(sq);
  if (opts.verify) {
    const double fine = probit_mixture_rule(a, s, 1, 0.5 * opts.resolution).integrate(sq);
    if (std::abs(fine - p11) > opts.verify_tol)
      throw NumericalError("vasicek_moments: quadrature did not converge");
  }
  return make_summary(p, p11);
}

MomentSummary vasicek_moments(const Vasicek& params, const QuadratureRule& rule) {
  validate(params);
  const double p = params.p;
  if (p == 0.0 || p == 1.0) return make_summary(p, p * p);
  double p11;
  if (rule.kind == QuadratureKind::fixed_grid) {
    p11 = rule.integrate([](double z) { return std::pow(std_normal_cdf(z), 2); });
  } else {
    p11 = rule.integrate([&](double f) { return std::pow(conditional_vasicek_rate(p, params.rho_a, f), 2); });
  }
  return make_summary(p, p11);
}

MomentSummary model_moments(const ModelParams& params, int n, const QuadratureOptions& opts) {
  return std::visit(
      [&](const auto& m) -> MomentSummary {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DavisLo>) return davis_lo_moments(m, n);
        else if constexpr (std::is_same_v<T, Torri>) return torri_moments(m, n);
        else return vasicek_moments(m, opts);
      },
      params);
}

MomentSummary pmf_moments(const CountDistribution& dist) {
  const int n = dist.n();
  if (n < 2) throw DomainError("pmf_moments: n must be >= 2");
  double e1 = 0.0, e2 = 0.0;
  for (int h = 1; h <= n; ++h) {
    const double w = dist.pmf(h);
    e1 += h * w;
    e2 += static_cast<double>(h) * (h - 1) * w;
  }
  return make_summary(e1 / n, e2 / (static_cast<double>(n) * (n - 1)));
}

MomentSummary aggregate_moments(std::span<const std::pair<int, MomentSummary>> per_year) {
  if (per_year.empty()) throw DomainError("aggregate_moments: empty input");
  double wm = 0.0, sm = 0.0, wp = 0.0, sp = 0.0;
  for (const auto& [n, s] : per_year) {
    if (n < 2) throw DomainError("aggregate_moments: every n must be >= 2");
    const double pairs = static_cast<double>(n) * (n - 1);
    wm += n;
    sm += n * s.m;
    wp += pairs;
    sp += pairs * s.p11;
  }
  return make_summary(sm / wm, sp / wp);
}

MomentSummary empirical_moments(const Panel& panel) {
  if (panel.empty()) throw DomainError("empirical_moments: empty panel");
  std::vector<std::pair<int, MomentSummary>> rows;
  rows.reserve(panel.size());
  for (const YearRecord& r : panel.records()) {
    if (r.n < 2) throw DomainError("empirical_moments: every n must be >= 2");
    const double m = static_cast<double>(r.L) / r.n;
    const double p11 = static_cast<double>(r.L) * (r.L - 1) / (static_cast<double>(r.n) * (r.n - 1));
    rows.emplace_back(r.n, MomentSummary{m, p11, 0.0, false});
  }
  return aggregate_moments(rows);
}

double count_variance(const MomentSummary& s, double n) {
  return n * s.m * (1.0 - s.m) + n * (n - 1.0) * (s.p11 - s.m * s.m);
}

}  // namespace defaultlab

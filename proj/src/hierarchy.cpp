#include "defaultlab/hierarchy.hpp"

#include <algorithm>
#include <cmath>

namespace defaultlab {

namespace {

// Environment rule on the probit scale; collapses to one node at sigma = 0.
QuadratureRule environment_rule(const HierParams& hp, int n, double resolution) {
  if (hp.sigma == 0.0) {
    QuadratureRule r;
    r.kind = QuadratureKind::fixed_grid;
    r.nodes = {hp.mu, hp.mu};
    r.weights = {0.5, 0.5};
    return r;
  }
  return probit_mixture_rule(hp.mu, hp.sigma, n, resolution);
}

double node_p(double y) { return std_normal_cdf(y); }

std::vector<double> mixture_log_probs(const HierParams& hp, int n, const QuadratureRule& rule,
                                      std::span<const int> hs) {
  std::vector<double> ps(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) ps[i] = node_p(rule.nodes[i]);
  return mixture_log_probs_over_p(hp.structural, n, hs, ps, rule.weights);
}

}  // namespace

void validate(const HierParams& hp) {
  if (!std::isfinite(hp.mu)) throw DomainError("hierarchical mu must be finite");
  if (!(hp.sigma >= 0.0) || !std::isfinite(hp.sigma)) throw DomainError("hierarchical sigma must be >= 0");
  if (std::holds_alternative<Vasicek>(hp.structural))
    throw DomainError("hierarchical structural model must be Davis-Lo or Torri");
  validate(with_p(hp.structural, 0.5));
}

ModelParams conditional_model(const HierParams& hp, double p) { return with_p(hp.structural, p); }

CountDistribution hier_pmf(const HierParams& hp, int n, const QuadratureOptions& opts) {
  validate(hp);
  if (hp.sigma == 0.0) return model_pmf(conditional_model(hp, node_p(hp.mu)), n);
  std::vector<int> hs(n + 1);
  for (int h = 0; h <= n; ++h) hs[h] = h;
  CountDistribution out(mixture_log_probs(hp, n, environment_rule(hp, n, opts.resolution), hs));
  if (opts.verify) {
    const CountDistribution fine(
        mixture_log_probs(hp, n, environment_rule(hp, n, 0.5 * opts.resolution), hs));
    for (int h = 0; h <= n; ++h)
      if (std::abs(out.pmf(h) - fine.pmf(h)) > opts.verify_tol)
        throw NumericalError("hier_pmf: quadrature did not converge");
  }
  return out;
}

std::vector<double> hier_log_probs(const HierParams& hp, int n, std::span<const int> hs,
                                   const QuadratureOptions& opts) {
  validate(hp);
  if (hp.sigma == 0.0) return log_probs(conditional_model(hp, node_p(hp.mu)), n, hs);
  return mixture_log_probs(hp, n, environment_rule(hp, n, opts.resolution), hs);
}

HierMoments hier_moments(const HierParams& hp, int n, const QuadratureOptions& opts) {
  validate(hp);
  if (n < 2) throw DomainError("hier_moments: n must be >= 2");
  const QuadratureRule rule = environment_rule(hp, n, opts.resolution);
  double e_m = 0.0, e_m2 = 0.0, e_iid = 0.0, e_inf = 0.0;
  const double nn = n;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const MomentSummary s = model_moments(conditional_model(hp, node_p(rule.nodes[i])), n);
    const double w = rule.weights[i];
    e_m += w * s.m;
    e_m2 += w * s.m * s.m;
    e_iid += w * nn * s.m * (1.0 - s.m);
    e_inf += w * nn * (nn - 1.0) * (s.p11 - s.m * s.m);
  }
  HierMoments out;
  out.mean_rate = e_m;
  out.mean_count = nn * e_m;
  out.var_env = std::max(0.0, nn * nn * (e_m2 - e_m * e_m));
  out.var_iid = e_iid;
  out.var_infect = e_inf;
  return out;
}

double variance_ratio(const HierParams& hp, int n, const QuadratureOptions& opts) {
  if (hp.sigma == 0.0) return 0.0;
  const HierMoments m = hier_moments(hp, n, opts);
  const double total = m.total_variance();
  if (!(total > 0.0)) throw DomainError("variance_ratio: zero count variance");
  return std::clamp(m.var_env / total, 0.0, 1.0);
}

double solve_mu_for_mean(const ModelParams& structural, int n, double sigma, double base_m,
                         const QuadratureOptions& opts) {
  if (!(base_m > 0.0 && base_m < 1.0)) throw DomainError("base_m must lie in (0, 1)");
  auto gap = [&](double mu) { return hier_moments({mu, sigma, structural}, n, opts).mean_rate - base_m; };
  double lo = -8.0, hi = 8.0;
  while (gap(lo) > 0.0) {
    lo *= 2.0;
    if (lo < -1e4) throw DomainError("solve_mu_for_mean: mean rate unreachable");
  }
  while (gap(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e4) throw DomainError("solve_mu_for_mean: mean rate unreachable");
  }
  return find_root(gap, lo, hi, 1e-13);
}

std::pair<double, double> solve_sigma_for_r(const ModelParams& structural, int n, double target_r,
                                            double base_m, const QuadratureOptions& opts) {
  if (!(target_r >= 0.0 && target_r < 1.0)) throw DomainError("target r must lie in [0, 1)");
  if (target_r == 0.0) return {solve_mu_for_mean(structural, n, 0.0, base_m, opts), 0.0};
  auto r_at = [&](double sigma) {
    const double mu = solve_mu_for_mean(structural, n, sigma, base_m, opts);
    return variance_ratio({mu, sigma, structural}, n, opts);
  };
  double hi = 0.25;
  while (r_at(hi) < target_r) {
    hi *= 2.0;
    if (hi > 64.0) throw DomainError("target r is not reachable at this mean rate");
  }
  const double sigma = find_root([&](double s) { return r_at(s) - target_r; }, 0.0, hi, 1e-12);
  return {solve_mu_for_mean(structural, n, sigma, base_m, opts), sigma};
}

DecompositionReport variance_decomposition(const HierParams& hp, int n_bar, double empirical_variance,
                                           const QuadratureOptions& opts) {
  if (!(empirical_variance > 0.0)) throw DomainError("empirical variance must be positive");
  if (n_bar < 2) throw DomainError("n_bar must be >= 2");
  const HierMoments m = hier_moments(hp, n_bar, opts);
  return {m.var_iid / empirical_variance, m.var_infect / empirical_variance, m.var_env / empirical_variance,
          empirical_variance};
}

double iid_dependence_ratio(const MomentSummary& model_moments, int n_bar, double empirical_variance) {
  if (!(empirical_variance > 0.0)) throw DomainError("empirical variance must be positive");
  const double nb = n_bar;
  return nb * (nb - 1.0) * (model_moments.p11 - model_moments.m * model_moments.m) / empirical_variance;
}

}  // namespace defaultlab

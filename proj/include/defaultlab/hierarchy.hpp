#pragma once

#include <span>
#include <utility>
#include <vector>

#include "defaultlab/moments.hpp"

namespace defaultlab {

/// Yearly baseline default probability p_t = Phi(y_t), y_t ~ N(mu, sigma^2),
/// with the contagion parameters of `structural` held fixed. The p field of
/// `structural` is ignored.
struct HierParams {
  double mu = 0.0;
  double sigma = 0.0;
  ModelParams structural = DavisLo{};
};

/// Throws DomainError unless sigma >= 0, mu is finite and the structural
/// model is Davis-Lo or Torri with valid contagion parameters.
void validate(const HierParams& hp);

/// Contagion model at a given baseline probability.
ModelParams conditional_model(const HierParams& hp, double p);

/// Mixture over y of the conditional count law; sigma = 0 gives the base
/// model at p = Phi(mu).
CountDistribution hier_pmf(const HierParams& hp, int n, const QuadratureOptions& opts = {});
std::vector<double> hier_log_probs(const HierParams& hp, int n, std::span<const int> hs,
                                   const QuadratureOptions& opts = {});

/// Conditional mean and variance of L integrated over the environment.
struct HierMoments {
  double mean_rate = 0.0;        // E_p[m(p)]
  double mean_count = 0.0;       // E[L]
  double var_env = 0.0;          // Var_p(E[L | p])
  double var_iid = 0.0;          // E_p[n m (1 - m)]
  double var_infect = 0.0;       // E_p[n (n - 1) (p11 - m^2)]
  double total_variance() const { return var_env + var_iid + var_infect; }
};

HierMoments hier_moments(const HierParams& hp, int n, const QuadratureOptions& opts = {});

/// r = Var_p(E[L | p]) / Var(L). The denominator comes from the law of total
/// variance with closed-form conditional moments.
double variance_ratio(const HierParams& hp, int n, const QuadratureOptions& opts = {});

/// mu giving unconditional mean default rate base_m at the given sigma.
double solve_mu_for_mean(const ModelParams& structural, int n, double sigma, double base_m,
                         const QuadratureOptions& opts = {});

/// (mu, sigma) with variance_ratio = target_r and mean rate base_m. Throws
/// DomainError when target_r is not reachable.
std::pair<double, double> solve_sigma_for_r(const ModelParams& structural, int n, double target_r,
                                            double base_m, const QuadratureOptions& opts = {});

struct DecompositionReport {
  double r_iid = 0.0;
  double r_infect = 0.0;
  double r_pt = 0.0;
  double normalizer = 0.0;
};

DecompositionReport variance_decomposition(const HierParams& hp, int n_bar, double empirical_variance,
                                           const QuadratureOptions& opts = {});

/// n_bar (n_bar - 1) (p11 - m^2) / empirical_variance.
double iid_dependence_ratio(const MomentSummary& model_moments, int n_bar, double empirical_variance);

}  // namespace defaultlab

#pragma once

#include <span>
#include <utility>

#include "defaultlab/models.hpp"
#include "defaultlab/panel.hpp"

namespace defaultlab {

/// Mean default rate m, joint default probability p11 and pairwise default
/// correlation rho. When m is 0 or 1 the correlation is undefined; rho is
/// then reported as 0 and degenerate is set.
struct MomentSummary {
  double m = 0.0;
  double p11 = 0.0;
  double rho = 0.0;
  bool degenerate = false;
};

MomentSummary make_summary(double m, double p11);

MomentSummary davis_lo_moments(const DavisLo& params, int n);
MomentSummary torri_moments(const Torri& params, int n);
/// p11 = E[p(F)^2]; independent of the pool size.
MomentSummary vasicek_moments(const Vasicek& params, const QuadratureOptions& opts = {});
MomentSummary vasicek_moments(const Vasicek& params, const QuadratureRule& rule);
MomentSummary model_moments(const ModelParams& params, int n, const QuadratureOptions& opts = {});

/// m = E[L]/n, p11 = E[L(L-1)]/(n(n-1)).
MomentSummary pmf_moments(const CountDistribution& dist);

/// Obligor-weighted m and pair-weighted p11 across years.
MomentSummary aggregate_moments(std::span<const std::pair<int, MomentSummary>> per_year);

/// Annual L/n and L(L-1)/(n(n-1)) aggregated with the same weights.
MomentSummary empirical_moments(const Panel& panel);

/// Var(L) = n m (1-m) + n (n-1) (p11 - m^2).
double count_variance(const MomentSummary& s, double n);

}  // namespace defaultlab

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "defaultlab/numerics.hpp"

namespace defaultlab {

/// Cumulative contagion: each idiosyncratic defaulter infects each survivor
/// independently with probability q.
struct DavisLo {
  double p = 0.0;
  double q = 0.0;
};

/// Threshold contagion: any infectious seed (probability v per defaulter)
/// switches on a global state that takes down every non-immune survivor
/// (immune with probability u).
struct Torri {
  double p = 0.0;
  double u = 0.0;
  double v = 0.0;
};

/// One-factor Gaussian copula with asset correlation rho_a.
struct Vasicek {
  double p = 0.0;
  double rho_a = 0.0;
};

using ModelParams = std::variant<DavisLo, Torri, Vasicek>;

enum class Family { davis_lo, torri, vasicek };

Family family_of(const ModelParams& params);
std::string to_string(Family family);
/// Accepts "davislo", "davis_lo", "torri", "vasicek".
Family family_from_string(const std::string& name);
int parameter_count(Family family);

/// Throws DomainError when a probability leaves [0,1] or rho_a leaves [0,1).
void validate(const ModelParams& params);

/// Exact law of the default count on {0..n}, held as log-probabilities.
/// Construction renormalizes, so every instance sums to one.
class CountDistribution {
 public:
  explicit CountDistribution(std::vector<double> log_pmf);
  static CountDistribution from_pmf(std::span<const double> pmf);

  int n() const { return static_cast<int>(log_pmf_.size()) - 1; }
  const std::vector<double>& log_pmf() const { return log_pmf_; }
  double log_pmf(int h) const { return log_pmf_.at(h); }
  double pmf(int h) const { return std::exp(log_pmf_.at(h)); }
  std::vector<double> pmf() const;
  double mean() const;

 private:
  std::vector<double> log_pmf_;
};

CountDistribution binomial_distribution(int n, double p);
CountDistribution point_mass(int n, int h);

CountDistribution davis_lo_pmf(const DavisLo& params, int n);

/// Shifted-binomial mixture over the number H of infectious seeds.
CountDistribution torri_pmf(const Torri& params, int n);
/// Same law expanded from the moment generating function; kept as an
/// independent cross-check of torri_pmf.
CountDistribution torri_pmf_mgf(const Torri& params, int n);

/// Mixture over the common factor with an adaptive probit rule.
CountDistribution vasicek_pmf(const Vasicek& params, int n, const QuadratureOptions& opts = {});
/// Mixture over an explicit rule. Gauss-Hermite nodes are factor values f;
/// fixed_grid nodes are probit-scale conditional rates z, p(z) = Phi(z).
CountDistribution vasicek_pmf(const Vasicek& params, int n, const QuadratureRule& rule);

/// p(f) = Phi((Phi^-1(p) - sqrt(rho_a) f) / sqrt(1 - rho_a)).
double conditional_vasicek_rate(double p, double rho_a, double f);

struct ContagionState {
  double pi_n = 0.0;
};

/// pi_n = 1 - (1 - p v)^n.
ContagionState activation_probability(const Torri& params, int n);

CountDistribution model_pmf(const ModelParams& params, int n, const QuadratureOptions& opts = {});

/// log P(L_n = h) for each requested h without building the full law. Cost
/// is O(h) per point for the contagion models.
std::vector<double> log_probs(const ModelParams& params, int n, std::span<const int> hs,
                              const QuadratureOptions& opts = {});

/// log P(L_n = h) for every h in hs and every baseline probability in ps,
/// with the remaining parameters taken from `params` (Davis-Lo or Torri).
/// Row i belongs to ps[i]. Used by mixtures over p, where the Davis-Lo
/// contagion kernel is shared across rows and Torri uses the closed form
/// from its generating function.
std::vector<std::vector<double>> log_probs_over_p(const ModelParams& params, int n,
                                                  std::span<const int> hs,
                                                  std::span<const double> ps);

/// log of sum_i weights[i] P(L_n = h | p = ps[i]) for each h in hs: the
/// law of a contagion model mixed over a discrete set of baseline
/// probabilities.
std::vector<double> mixture_log_probs_over_p(const ModelParams& params, int n,
                                             std::span<const int> hs, std::span<const double> ps,
                                             std::span<const double> weights);

/// Replaces the idiosyncratic default probability, keeping the rest.
ModelParams with_p(const ModelParams& params, double p);
double base_p(const ModelParams& params);

}  // namespace defaultlab

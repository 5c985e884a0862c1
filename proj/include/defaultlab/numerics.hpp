#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace defaultlab {

/// Thrown when an argument lies outside the domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when an integration rule or solver fails to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Log-space combinatorics
// ---------------------------------------------------------------------------

/// log(k!) from a table for small k, lgamma beyond it.
double log_factorial(int k);

/// log C(n, k); requires 0 <= k <= n.
double log_choose(int n, int k);

/// log of the Binomial(n, p) mass at k. Uses 0*log(0) = 0 and returns
/// kLogZero for impossible events.
double log_binomial_pmf(int k, int n, double p);

/// Same as log_binomial_pmf with log(p) and log(1-p) supplied by the caller.
/// No validation; used in inner loops.
inline double log_binomial_pmf_unchecked(int k, int n, double log_p, double log_q) {
  double r = log_choose(n, k);
  if (k > 0) r += k * log_p;
  if (n - k > 0) r += (n - k) * log_q;
  return r;
}

double log_sum_exp(std::span<const double> values);

/// Streaming log-sum-exp accumulator.
class LogSumAccumulator {
 public:
  void add(double log_value) {
    if (log_value == kLogZero) return;
    if (log_value <= max_) {
      sum_ += std::exp(log_value - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_value) + 1.0;
      max_ = log_value;
    }
  }
  double result() const { return max_ == kLogZero ? kLogZero : max_ + std::log(sum_); }

 private:
  double max_ = kLogZero;
  double sum_ = 0.0;
};

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// log Phi(x), accurate far into the lower tail.
double log_std_normal_cdf(double x);
/// Inverse of std_normal_cdf on (0, 1). Acklam's rational approximation
/// followed by a Halley step.
double std_normal_quantile(double u);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

enum class QuadratureKind { gauss_hermite_probabilist, fixed_grid };

/// Nodes and weights for E[g(X)]. For gauss_hermite_probabilist X ~ N(0,1);
/// for fixed_grid the nodes are the values of the mixing variable itself.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  QuadratureKind kind = QuadratureKind::gauss_hermite_probabilist;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double integrate(F&& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * g(nodes[i]);
    return s;
  }
};

/// Probabilist Gauss-Hermite rule of the given order (2..256), weights
/// normalized to sum to one.
QuadratureRule gauss_hermite(int order);

struct QuadratureOptions {
  /// Panel width multiplier; smaller is finer.
  double resolution = 1.0;
  /// Recompute at half resolution and require agreement within verify_tol.
  bool verify = false;
  double verify_tol = 1e-9;
};

/// Rule for E[g(Z)] with Z ~ N(mean, sd^2) when g depends on Z through the
/// binomial kernels of Binomial(pool_size, Phi(Z)). Composite Gauss-Legendre
/// panels are sized to the kernel width in Z; mass beyond |Z| = 40, where
/// Phi(Z) is 0 or 1 in double precision, is carried by one node per side.
/// Requires sd > 0 and pool_size >= 1.
QuadratureRule probit_mixture_rule(double mean, double sd, int pool_size, double resolution = 1.0);

// ---------------------------------------------------------------------------
// Optimization and root finding
// ---------------------------------------------------------------------------

struct ScalarMinimum {
  double argmin;
  double value;
};

/// Brent minimization on [lo, hi]; f must be unimodal there. Endpoints are
/// compared against the interior result so boundary minima are returned
/// exactly. Throws NumericalError on a non-finite evaluation.
ScalarMinimum minimize_scalar(const std::function<double(double)>& f, double lo, double hi,
                              double tol);

/// Root of a continuous f on [lo, hi] with f(lo), f(hi) of opposite sign
/// (or zero). Bisection to an interval width of x_tol.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double x_tol = 1e-15, int max_iter = 200);

struct SimplexOptions {
  int max_iter = 4000;
  double f_tol = 1e-10;
  double x_tol = 1e-8;
  int restarts = 3;
};

struct SimplexResult {
  std::vector<double> argmin;
  double value = kInf;
  bool converged = false;
  int evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

/// Nelder-Mead minimization. Non-finite values are treated as +inf vertices.
/// Each restart rebuilds the simplex around the incumbent with the original
/// scale; the run stops early once a restart no longer improves by f_tol.
SimplexResult minimize_simplex(const Objective& f, std::vector<double> x0,
                               std::vector<double> scale, const SimplexOptions& opts = {});

// Transforms between bounded parameters and unconstrained coordinates.
double logistic(double x);
double logit(double p);
double softplus(double x);
double inverse_softplus(double y);

}  // namespace defaultlab

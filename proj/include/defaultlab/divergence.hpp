#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defaultlab/hierarchy.hpp"

namespace defaultlab {

/// D(P||Q) = sum over P(h) > 0 of P(h) log(P(h)/Q(h)). +inf when Q vanishes
/// where P does not. Throws DomainError on a support mismatch.
double kl_divergence(const CountDistribution& p, const CountDistribution& q);

/// Divergence with candidate probabilities floored: Q(h) -> max(Q(h), floor).
/// floor = 0 gives kl_divergence.
double kl_divergence_floored(const CountDistribution& p, const CountDistribution& q, double floor);

struct ProjectionOptions {
  SimplexOptions simplex{2000, 1e-12, 1e-9, 2};
  /// Candidate probability floor used by the objective and by the reported
  /// kl. With 0 the search floors log-probabilities at -700 and the reported
  /// kl is exact.
  double probability_floor = 1e-14;
  int grid_points = 5;    // per coordinate of the transformed box
  int refine_starts = 3;  // best seeds polished by the simplex search
  QuadratureOptions quad{};
};

struct ProjectionResult {
  Family family = Family::davis_lo;
  double kl = 0.0;        // objective value at params (floored as configured)
  double kl_exact = 0.0;  // unfloored divergence at params
  ModelParams params;
  bool converged = false;
  bool boundary = false;
  double best_seed_kl = 0.0;  // smallest objective among the seeds
};

ProjectionResult kl_project(const CountDistribution& target, Family family,
                            const ProjectionOptions& opts = {});

struct KlCurvePoint {
  double r = 0.0;
  bool reachable = false;
  std::string error;
  double mu = 0.0;
  double sigma = 0.0;
  std::optional<ProjectionResult> projection;
};

/// For each r, the hierarchical law with variance ratio r and mean rate
/// base_m, projected onto the Vasicek family.
std::vector<KlCurvePoint> kl_curve_vs_r(const ModelParams& structural, int n,
                                        std::span<const double> r_grid, double base_m,
                                        const ProjectionOptions& opts = {});

}  // namespace defaultlab

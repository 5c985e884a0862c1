#pragma once

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "defaultlab/hierarchy.hpp"

namespace defaultlab {

enum class Spec { davis_lo, torri, vasicek, hier_davis_lo, hier_torri };

/// Tags: "davislo", "torri", "vasicek", "hier-davislo", "hier-torri".
std::string to_string(Spec spec);
Spec spec_from_string(const std::string& tag);
/// Free parameters: 2, 3, 2, 3 (mu, sigma, q), 4 (mu, sigma, u, v).
int parameter_count(Spec spec);
bool is_hierarchical(Spec spec);
Spec spec_of(const ModelParams& params);

using FitParams = std::variant<ModelParams, HierParams>;

struct FitOptions {
  SimplexOptions simplex{3000, 1e-8, 1e-5, 1};
  int grid_points = 3;    // per coordinate, i.i.d. specifications
  int refine_starts = 2;  // best seeds polished by the simplex search
  /// Coarser probit rules than the default; log-probabilities move by
  /// about 1e-10 at resolution 4.
  QuadratureOptions quad{4.0};
};

struct FitResult {
  Spec spec = Spec::davis_lo;
  FitParams params;
  double nll = 0.0;
  double aic = 0.0;
  bool converged = false;
  bool boundary = false;
};

/// Exact negative log-likelihood of the panel. Years sharing a pool size
/// share one evaluation. Out-of-domain parameters give +inf.
double nll(Spec spec, const FitParams& params, const Panel& panel, const QuadratureOptions& quad = {});

/// Maximum likelihood over transformed coordinates with method-of-moments
/// and grid seeds. Throws DomainError on an empty panel.
FitResult fit(Spec spec, const Panel& panel, const FitOptions& opts = {});

struct AicSelection {
  Spec winner = Spec::davis_lo;
  std::vector<std::pair<Spec, double>> table;
};

/// Smallest AIC wins. AIC values equal to within 1e-9 relative are ties,
/// which go to fewer parameters, then to the smaller tag.
AicSelection aic_select(std::span<const FitResult> fits);

}  // namespace defaultlab

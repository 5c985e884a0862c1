#pragma once

#include <optional>
#include <string>
#include <vector>

#include "defaultlab/moments.hpp"

namespace defaultlab {

/// Pool size and the mean default rate and default correlation to match.
struct CalibrationTarget {
  int n = 0;
  double m = 0.0;
  double rho = 0.0;
};

/// Thrown when no parameters in the admissible box reach the target.
class InfeasibleTarget : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Reference setting used throughout: n = 200, m = 0.02, rho = 0.08.
inline constexpr CalibrationTarget kReferenceTarget{200, 0.02, 0.08};

/// Idiosyncratic default probabilities of the three representative Torri
/// branches on the reference iso-(m, rho) curve.
inline constexpr double kTorriHighP = 0.003109;
inline constexpr double kTorriMidP = 0.009436;
inline constexpr double kTorriLowP = 0.015762;

inline constexpr double kDefaultCalibrationTol = 1e-10;

/// Nested bisection: outer on q, inner on p in [0, m] for the mean.
DavisLo calibrate_davis_lo(const CalibrationTarget& target, double tol = kDefaultCalibrationTol);

/// A point on the Torri iso-(m, rho) curve, parameterized by p.
struct TorriBranch {
  double p = 0.0;
  double u = 0.0;
  double v = 0.0;
  double pi_n = 0.0;

  Torri params() const { return {p, u, v}; }
};

/// Solves (u, v) at fixed p. u follows from the mean equation; rho is
/// strictly decreasing in v along that constraint, so v is bisected on
/// [v_min, 1] where v_min is the value giving u = 0.
TorriBranch calibrate_torri_at_p(const CalibrationTarget& target, double p,
                                 double tol = kDefaultCalibrationTol);

/// Admissible p range of the Torri curve, found by scanning and bisecting
/// the feasibility boundary.
struct PRange {
  double lo = 0.0;
  double hi = 0.0;
};
PRange torri_feasible_p_range(const CalibrationTarget& target);

struct ManifoldPoint {
  double p = 0.0;
  std::optional<TorriBranch> branch;  // empty when infeasible
  std::string reason;                 // why the point was skipped
};

std::vector<ManifoldPoint> trace_torri_manifold(const CalibrationTarget& target,
                                                const std::vector<double>& p_grid,
                                                double tol = kDefaultCalibrationTol);

/// p = m; rho_a by bisection on the increasing map rho_a -> rho.
Vasicek calibrate_vasicek(const CalibrationTarget& target, double tol = kDefaultCalibrationTol,
                          const QuadratureOptions& opts = {});

}  // namespace defaultlab

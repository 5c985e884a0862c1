#include "defaultlab/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace defaultlab {

namespace {

void check_target(const CalibrationTarget& t) {
  if (t.n < 2) throw DomainError("calibration target: n must be >= 2");
  if (!(t.m > 0.0 && t.m < 1.0)) throw DomainError("calibration target: m must lie in (0, 1)");
  if (!(t.rho > 0.0 && t.rho < 1.0)) throw DomainError("calibration target: rho must lie in (0, 1)");
}

// p solving m(p, q) = target m; m is increasing in p and m(p) >= p.
double davis_lo_p_for_mean(double q, const CalibrationTarget& t) {
  return find_root([&](double p) { return davis_lo_moments({p, q}, t.n).m - t.m; }, 0.0, t.m, 0.0);
}

// Torri u from the mean equation at (p, v); may fall outside [0, 1].
double torri_u_for_mean(double p, double v, const CalibrationTarget& t) {
  const double pi_nm1 = -std::expm1((t.n - 1) * std::log1p(-p * v));
  if (pi_nm1 <= 0.0) return -kInf;
  return 1.0 - (t.m - p) / ((1.0 - p) * pi_nm1);
}

double torri_v_min(double p, const CalibrationTarget& t) {
  // pi_{n-1}(v_min) = (m - p)/(1 - p), i.e. u = 0.
  const double need = (t.m - p) / (1.0 - p);
  return -std::expm1(std::log1p(-need) / (t.n - 1)) / p;
}

double torri_rho_on_mean(double p, double v, const CalibrationTarget& t) {
  const double u = std::clamp(torri_u_for_mean(p, v, t), 0.0, 1.0);
  return torri_moments({p, u, v}, t.n).rho;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace

DavisLo calibrate_davis_lo(const CalibrationTarget& target, double tol) {
  check_target(target);
  auto rho_at = [&](double q) {
    const double p = davis_lo_p_for_mean(q, target);
    return davis_lo_moments({p, q}, target.n).rho;
  };
  if (rho_at(1.0) < target.rho)
    throw InfeasibleTarget("Davis-Lo cannot reach rho=" + fmt(target.rho) + " at m=" + fmt(target.m));
  const double q = find_root([&](double x) { return rho_at(x) - target.rho; }, 0.0, 1.0, 0.0);
  const DavisLo out{davis_lo_p_for_mean(q, target), q};
  const MomentSummary s = davis_lo_moments(out, target.n);
  if (std::abs(s.m - target.m) > tol || std::abs(s.rho - target.rho) > tol)
    throw NumericalError("calibrate_davis_lo: residual above tolerance");
  return out;
}

TorriBranch calibrate_torri_at_p(const CalibrationTarget& target, double p, double tol) {
  check_target(target);
  if (!(p > 0.0 && p < target.m))
    throw InfeasibleTarget("Torri: p=" + fmt(p) + " must lie in (0, m)");
  const double v_min = torri_v_min(p, target);
  if (!(v_min <= 1.0))
    throw InfeasibleTarget("Torri: p=" + fmt(p) + " too small to reach the mean even at u=0, v=1");
  const double rho_hi = torri_rho_on_mean(p, v_min, target);
  const double rho_lo = torri_rho_on_mean(p, 1.0, target);
  if (rho_hi < target.rho)
    throw InfeasibleTarget("Torri: rho=" + fmt(target.rho) + " above the maximum " + fmt(rho_hi) +
                           " at p=" + fmt(p));
  if (rho_lo > target.rho)
    throw InfeasibleTarget("Torri: rho=" + fmt(target.rho) + " below the minimum " + fmt(rho_lo) +
                           " at p=" + fmt(p));
  const double v = find_root([&](double x) { return torri_rho_on_mean(p, x, target) - target.rho; },
                             v_min, 1.0, 0.0);
  const double u = std::clamp(torri_u_for_mean(p, v, target), 0.0, 1.0);
  const Torri params{p, u, v};
  const MomentSummary s = torri_moments(params, target.n);
  if (std::abs(s.m - target.m) > tol || std::abs(s.rho - target.rho) > tol)
    throw NumericalError("calibrate_torri_at_p: residual above tolerance");
  return {p, u, v, activation_probability(params, target.n).pi_n};
}

PRange torri_feasible_p_range(const CalibrationTarget& target) {
  check_target(target);
  auto feasible = [&](double p) {
    try {
      calibrate_torri_at_p(target, p, 1e-6);
      return true;
    } catch (const DomainError&) {
      return false;
    } catch (const NumericalError&) {
      return false;
    }
  };
  // Scan on a log grid to find one feasible point, then bisect both edges.
  constexpr int kScan = 400;
  double seed = -1.0;
  for (int i = 1; i < kScan && seed < 0.0; ++i) {
    const double p = target.m * std::pow(1e-6, 1.0 - static_cast<double>(i) / kScan);
    if (feasible(p)) seed = p;
  }
  if (seed < 0.0) throw InfeasibleTarget("Torri: no feasible p for this target");
  double a = 0.0, b = seed;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (a + b);
    (feasible(mid) ? b : a) = mid;
  }
  PRange r;
  r.lo = b;
  a = seed;
  b = target.m;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (a + b);
    (feasible(mid) ? a : b) = mid;
  }
  r.hi = a;
  return r;
}

std::vector<ManifoldPoint> trace_torri_manifold(const CalibrationTarget& target,
                                                const std::vector<double>& p_grid, double tol) {
  std::vector<ManifoldPoint> out;
  out.reserve(p_grid.size());
  for (double p : p_grid) {
    ManifoldPoint pt;
    pt.p = p;
    try {
      pt.branch = calibrate_torri_at_p(target, p, tol);
    } catch (const DomainError& e) {
      pt.reason = e.what();
    } catch (const NumericalError& e) {
      pt.reason = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

Vasicek calibrate_vasicek(const CalibrationTarget& target, double tol, const QuadratureOptions& opts) {
  check_target(target);
  const double p = target.m;
  auto rho_at = [&](double r) { return vasicek_moments({p, r}, opts).rho - target.rho; };
  const double hi = 1.0 - 1e-12;
  if (rho_at(hi) < 0.0) throw InfeasibleTarget("Vasicek: rho above the comonotone limit");
  const double r = find_root(rho_at, 0.0, hi, 1e-15);
  const Vasicek out{p, r};
  if (std::abs(vasicek_moments(out, opts).rho - target.rho) > tol)
    throw NumericalError("calibrate_vasicek: residual above tolerance");
  return out;
}

}  // namespace defaultlab

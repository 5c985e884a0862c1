#include "defaultlab/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "defaultlab/calibration.hpp"

namespace defaultlab {

namespace {

constexpr double kSearchLogFloor = -700.0;
constexpr double kBoundaryCoordinate = 8.0;
constexpr double kSeedClamp = 12.0;

double divergence_impl(const CountDistribution& p, const CountDistribution& q, double log_floor) {
  if (p.n() != q.n()) throw DomainError("kl_divergence: support sizes differ");
  double sum = 0.0;
  for (int h = 0; h <= p.n(); ++h) {
    const double lp = p.log_pmf(h);
    if (lp == kLogZero) continue;
    const double lq = std::max(q.log_pmf(h), log_floor);
    if (lq == kLogZero) return kInf;
    sum += std::exp(lp) * (lp - lq);
  }
  return std::max(sum, 0.0);
}

ModelParams from_coordinates(Family family, std::span<const double> x) {
  switch (family) {
    case Family::davis_lo:
      return DavisLo{logistic(x[0]), logistic(x[1])};
    case Family::torri:
      return Torri{logistic(x[0]), logistic(x[1]), logistic(x[2])};
    case Family::vasicek:
      return Vasicek{logistic(x[0]), logistic(x[1])};
  }
  throw DomainError("unknown family");
}

std::vector<double> to_coordinates(const ModelParams& params) {
  auto c = [](double v) { return std::clamp(logit(std::clamp(v, 1e-300, 1.0 - 1e-16)), -kSeedClamp, kSeedClamp); };
  if (const auto* d = std::get_if<DavisLo>(&params)) return {c(d->p), c(d->q)};
  if (const auto* t = std::get_if<Torri>(&params)) return {c(t->p), c(t->u), c(t->v)};
  const auto& v = std::get<Vasicek>(params);
  return {c(v.p), c(v.rho_a)};
}

// Parameter values in a fixed order, used to break ties deterministically.
std::vector<double> values_of(const ModelParams& params) {
  if (const auto* d = std::get_if<DavisLo>(&params)) return {d->p, d->q};
  if (const auto* t = std::get_if<Torri>(&params)) return {t->p, t->u, t->v};
  const auto& v = std::get<Vasicek>(params);
  return {v.p, v.rho_a};
}

// Sets coordinate i of params to an exact boundary value.
ModelParams snapped(const ModelParams& params, int i, double value) {
  ModelParams out = params;
  if (auto* d = std::get_if<DavisLo>(&out)) (i == 0 ? d->p : d->q) = value;
  else if (auto* t = std::get_if<Torri>(&out)) (i == 0 ? t->p : i == 1 ? t->u : t->v) = value;
  else {
    auto& v = std::get<Vasicek>(out);
    (i == 0 ? v.p : v.rho_a) = value;
  }
  return out;
}

// Moment-matched parameters in the family, where calibration succeeds.
std::vector<ModelParams> moment_seeds(const CountDistribution& target, Family family) {
  std::vector<ModelParams> seeds;
  const MomentSummary s = pmf_moments(target);
  if (s.degenerate || !(s.rho > 0.0)) return seeds;
  const CalibrationTarget ct{target.n(), s.m, s.rho};
  try {
    switch (family) {
      case Family::davis_lo:
        seeds.push_back(calibrate_davis_lo(ct, 1e-8));
        break;
      case Family::vasicek:
        seeds.push_back(calibrate_vasicek(ct, 1e-8));
        break;
      case Family::torri: {
        const PRange range = torri_feasible_p_range(ct);
        for (double w : {0.1, 0.5, 0.9}) {
          const double p = std::exp((1.0 - w) * std::log(range.lo) + w * std::log(range.hi));
          seeds.push_back(calibrate_torri_at_p(ct, p).params());
        }
        break;
      }
    }
  } catch (const std::exception&) {
    // No moment-matched seed; the grid still covers the box.
  }
  return seeds;
}

struct Candidate {
  double value = kInf;
  ModelParams params;
  bool converged = false;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value < b.value;
  return values_of(a.params) < values_of(b.params);
}

}  // namespace

double kl_divergence(const CountDistribution& p, const CountDistribution& q) {
  return divergence_impl(p, q, kLogZero);
}

double kl_divergence_floored(const CountDistribution& p, const CountDistribution& q, double floor) {
  if (!(floor >= 0.0 && floor < 1.0)) throw DomainError("kl floor must lie in [0, 1)");
  return divergence_impl(p, q, floor > 0.0 ? std::log(floor) : kLogZero);
}

ProjectionResult kl_project(const CountDistribution& target, Family family, const ProjectionOptions& opts) {
  if (opts.grid_points < 1 || opts.refine_starts < 1) throw DomainError("kl_project: empty search schedule");
  const int n = target.n();
  const double log_floor = opts.probability_floor > 0.0 ? std::log(opts.probability_floor) : kSearchLogFloor;
  auto at = [&](const ModelParams& mp) {
    try {
      return divergence_impl(target, model_pmf(mp, n, opts.quad), log_floor);
    } catch (const std::exception&) {
      return kInf;
    }
  };
  const int dim = parameter_count(family);

  std::vector<Candidate> seeds;
  std::vector<double> axis(opts.grid_points);
  for (int i = 0; i < opts.grid_points; ++i)
    axis[i] = opts.grid_points == 1 ? 0.0 : -8.0 + 12.0 * i / (opts.grid_points - 1);
  std::vector<int> idx(dim, 0);
  for (;;) {
    std::vector<double> x(dim);
    for (int d = 0; d < dim; ++d) x[d] = axis[idx[d]];
    const ModelParams mp = from_coordinates(family, x);
    seeds.push_back({at(mp), mp, false});
    int d = 0;
    while (d < dim && ++idx[d] == opts.grid_points) idx[d++] = 0;
    if (d == dim) break;
  }
  for (const ModelParams& mp : moment_seeds(target, family)) seeds.push_back({at(mp), mp, false});
  std::sort(seeds.begin(), seeds.end(), better);

  Candidate best = seeds.front();
  const double best_seed = best.value;
  const int starts = std::min<int>(opts.refine_starts, static_cast<int>(seeds.size()));
  for (int s = 0; s < starts; ++s) {
    const auto objective = [&](std::span<const double> x) { return at(from_coordinates(family, x)); };
    const SimplexResult r =
        minimize_simplex(objective, to_coordinates(seeds[s].params), std::vector<double>(dim, 1.0), opts.simplex);
    Candidate c{r.value, from_coordinates(family, r.argmin), r.converged};
    // Coordinates pushed far out are snapped to their exact bound when that
    // does not cost anything.
    for (int i = 0; i < dim; ++i) {
      if (std::abs(r.argmin[i]) < kBoundaryCoordinate) continue;
      double edge = r.argmin[i] < 0.0 ? 0.0 : 1.0;
      if (family == Family::vasicek && i == 1 && edge == 1.0) continue;
      const ModelParams mp = snapped(c.params, i, edge);
      const double v = at(mp);
      if (v <= c.value + 1e-10 * (1.0 + std::abs(c.value))) c = {std::min(v, c.value), mp, c.converged};
    }
    if (better(c, best)) best = c;
  }

  ProjectionResult out;
  out.family = family;
  out.params = best.params;
  out.kl = at(best.params);
  out.converged = best.converged;
  out.best_seed_kl = best_seed;
  const std::vector<double> v = values_of(best.params);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool upper_ok = !(family == Family::vasicek && i == 1);
    if (v[i] == 0.0 || (upper_ok && v[i] == 1.0)) out.boundary = true;
  }
  out.kl_exact = kl_divergence(target, model_pmf(best.params, n, opts.quad));
  return out;
}

std::vector<KlCurvePoint> kl_curve_vs_r(const ModelParams& structural, int n, std::span<const double> r_grid,
                                        double base_m, const ProjectionOptions& opts) {
  std::vector<KlCurvePoint> out;
  for (double r : r_grid) {
    KlCurvePoint pt;
    pt.r = r;
    try {
      const auto [mu, sigma] = solve_sigma_for_r(structural, n, r, base_m, opts.quad);
      pt.mu = mu;
      pt.sigma = sigma;
      pt.projection = kl_project(hier_pmf({mu, sigma, structural}, n, opts.quad), Family::vasicek, opts);
      pt.reachable = true;
    } catch (const DomainError& e) {
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace defaultlab

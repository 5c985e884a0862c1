#include "defaultlab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "defaultlab/calibration.hpp"

namespace defaultlab {

namespace {

// How each fitted value maps to an unconstrained coordinate.
enum class Coord { probability, correlation, real, scale };

constexpr double kBoundaryCoordinate = 8.0;
constexpr double kSeedClamp = 12.0;

std::vector<Coord> layout(Spec spec) {
  switch (spec) {
    case Spec::davis_lo: return {Coord::probability, Coord::probability};
    case Spec::torri: return {Coord::probability, Coord::probability, Coord::probability};
    case Spec::vasicek: return {Coord::probability, Coord::correlation};
    case Spec::hier_davis_lo: return {Coord::real, Coord::scale, Coord::probability};
    case Spec::hier_torri: return {Coord::real, Coord::scale, Coord::probability, Coord::probability};
  }
  throw DomainError("unknown specification");
}

FitParams from_values(Spec spec, std::span<const double> v) {
  switch (spec) {
    case Spec::davis_lo: return ModelParams{DavisLo{v[0], v[1]}};
    case Spec::torri: return ModelParams{Torri{v[0], v[1], v[2]}};
    case Spec::vasicek: return ModelParams{Vasicek{v[0], v[1]}};
    case Spec::hier_davis_lo: return HierParams{v[0], v[1], DavisLo{0.0, v[2]}};
    case Spec::hier_torri: return HierParams{v[0], v[1], Torri{0.0, v[2], v[3]}};
  }
  throw DomainError("unknown specification");
}

std::vector<double> values_of(const FitParams& fp) {
  if (const auto* mp = std::get_if<ModelParams>(&fp)) {
    if (const auto* d = std::get_if<DavisLo>(mp)) return {d->p, d->q};
    if (const auto* t = std::get_if<Torri>(mp)) return {t->p, t->u, t->v};
    const auto& v = std::get<Vasicek>(*mp);
    return {v.p, v.rho_a};
  }
  const auto& hp = std::get<HierParams>(fp);
  if (const auto* d = std::get_if<DavisLo>(&hp.structural)) return {hp.mu, hp.sigma, d->q};
  const auto& t = std::get<Torri>(hp.structural);
  return {hp.mu, hp.sigma, t.u, t.v};
}

double to_coordinate(Coord c, double v) {
  switch (c) {
    case Coord::probability:
    case Coord::correlation:
      return std::clamp(logit(std::clamp(v, 1e-300, 1.0 - 1e-16)), -kSeedClamp, kSeedClamp);
    case Coord::real: return v;
    case Coord::scale: return std::clamp(inverse_softplus(std::max(v, 1e-300)), -kSeedClamp, kSeedClamp);
  }
  return v;
}

double from_coordinate(Coord c, double x) {
  switch (c) {
    case Coord::probability:
    case Coord::correlation: return logistic(x);
    case Coord::real: return x;
    case Coord::scale: return softplus(x);
  }
  return x;
}

bool at_bound(Coord c, double v) {
  switch (c) {
    case Coord::probability: return v == 0.0 || v == 1.0;
    case Coord::correlation:
    case Coord::scale: return v == 0.0;
    case Coord::real: return false;
  }
  return false;
}

struct Candidate {
  double value = kInf;
  std::vector<double> values;
  bool converged = false;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.values < b.values;
}

void check_params(Spec spec, const FitParams& fp) {
  bool ok = false;
  if (const auto* mp = std::get_if<ModelParams>(&fp)) ok = !is_hierarchical(spec) && spec_of(*mp) == spec;
  else {
    const auto& hp = std::get<HierParams>(fp);
    ok = (spec == Spec::hier_davis_lo && std::holds_alternative<DavisLo>(hp.structural)) ||
         (spec == Spec::hier_torri && std::holds_alternative<Torri>(hp.structural));
  }
  if (!ok) throw DomainError("parameters do not belong to specification " + to_string(spec));
}

// Method-of-moments and default seeds in value space.
std::vector<std::vector<double>> seeds_for(Spec spec, const Panel& panel, const FitOptions& opts) {
  std::vector<std::vector<double>> seeds;
  const MomentSummary emp = empirical_moments(panel);
  const double m = std::clamp(emp.m, 1e-6, 0.5);
  const int n_bar = std::max(2, static_cast<int>(std::lround(panel.n_bar())));
  const bool dependent = !emp.degenerate && emp.rho > 0.0;
  const CalibrationTarget ct{n_bar, m, dependent ? emp.rho : 0.0};

  std::vector<ModelParams> structural;
  if (spec == Spec::davis_lo || spec == Spec::hier_davis_lo) {
    structural.push_back(DavisLo{m, 0.0});
    if (dependent) try { structural.push_back(calibrate_davis_lo(ct, 1e-8)); } catch (const std::exception&) {}
  }
  if (spec == Spec::torri || spec == Spec::hier_torri) {
    structural.push_back(Torri{m, 0.5, 0.0});
    if (dependent) try {
        const PRange range = torri_feasible_p_range(ct);
        for (double w : {0.1, 0.5, 0.9}) {
          const double p = std::exp((1.0 - w) * std::log(range.lo) + w * std::log(range.hi));
          structural.push_back(calibrate_torri_at_p(ct, p).params());
        }
      } catch (const std::exception&) {}
  }
  if (spec == Spec::vasicek) {
    seeds.push_back({m, 0.0});
    if (dependent) try {
        const Vasicek v = calibrate_vasicek(ct, 1e-8);
        seeds.push_back({v.p, v.rho_a});
      } catch (const std::exception&) {}
    return seeds;
  }
  if (!is_hierarchical(spec)) {
    for (const ModelParams& s : structural) seeds.push_back(values_of(FitParams{s}));
    return seeds;
  }
  if (spec == Spec::hier_davis_lo)
    for (double q : {1e-3, 1e-2}) structural.push_back(DavisLo{m, q});
  else
    for (auto [u, v] : {std::pair{0.5, 0.01}, std::pair{0.9, 0.1}}) structural.push_back(Torri{m, u, v});
  for (double sigma : {0.1, 0.3, 0.6}) {
    for (const ModelParams& s : structural) {
      double mu = std_normal_quantile(m);
      try {
        mu = solve_mu_for_mean(s, n_bar, sigma, m, opts.quad);
      } catch (const std::exception&) {
      }
      std::vector<double> v = values_of(FitParams{HierParams{mu, sigma, s}});
      seeds.push_back(v);
    }
  }
  return seeds;
}

}  // namespace

std::string to_string(Spec spec) {
  switch (spec) {
    case Spec::davis_lo: return "davislo";
    case Spec::torri: return "torri";
    case Spec::vasicek: return "vasicek";
    case Spec::hier_davis_lo: return "hier-davislo";
    case Spec::hier_torri: return "hier-torri";
  }
  return "?";
}

Spec spec_from_string(const std::string& tag) {
  for (Spec s : {Spec::davis_lo, Spec::torri, Spec::vasicek, Spec::hier_davis_lo, Spec::hier_torri})
    if (tag == to_string(s)) return s;
  if (tag == "davis_lo" || tag == "davis-lo") return Spec::davis_lo;
  if (tag == "hier_davis_lo" || tag == "hier-davis-lo") return Spec::hier_davis_lo;
  if (tag == "hier_torri") return Spec::hier_torri;
  throw DomainError("unknown specification: " + tag);
}

int parameter_count(Spec spec) { return static_cast<int>(layout(spec).size()); }

bool is_hierarchical(Spec spec) { return spec == Spec::hier_davis_lo || spec == Spec::hier_torri; }

Spec spec_of(const ModelParams& params) {
  switch (family_of(params)) {
    case Family::davis_lo: return Spec::davis_lo;
    case Family::torri: return Spec::torri;
    case Family::vasicek: return Spec::vasicek;
  }
  return Spec::davis_lo;
}

double nll(Spec spec, const FitParams& params, const Panel& panel, const QuadratureOptions& quad) {
  if (panel.empty()) throw DomainError("nll: empty panel");
  check_params(spec, params);
  std::map<int, std::map<int, int>> groups;
  for (const YearRecord& r : panel.records()) ++groups[r.n][r.L];
  double total = 0.0;
  try {
    for (const auto& [n, counts] : groups) {
      std::vector<int> hs;
      std::vector<int> mult;
      for (const auto& [h, c] : counts) {
        hs.push_back(h);
        mult.push_back(c);
      }
      const std::vector<double> lp = is_hierarchical(spec)
                                         ? hier_log_probs(std::get<HierParams>(params), n, hs, quad)
                                         : log_probs(std::get<ModelParams>(params), n, hs, quad);
      for (std::size_t j = 0; j < hs.size(); ++j) {
        if (!(lp[j] > kLogZero)) return kInf;
        total -= mult[j] * lp[j];
      }
    }
  } catch (const DomainError&) {
    return kInf;
  } catch (const NumericalError&) {
    return kInf;
  }
  return std::isfinite(total) ? total : kInf;
}

FitResult fit(Spec spec, const Panel& panel, const FitOptions& opts) {
  if (panel.empty()) throw DomainError("fit: empty panel");
  if (opts.refine_starts < 1) throw DomainError("fit: refine_starts must be >= 1");
  const std::vector<Coord> coords = layout(spec);
  const int dim = static_cast<int>(coords.size());
  auto objective_values = [&](std::span<const double> v) { return nll(spec, from_values(spec, v), panel, opts.quad); };
  auto values_from_coordinates = [&](std::span<const double> x) {
    std::vector<double> v(dim);
    for (int i = 0; i < dim; ++i) v[i] = from_coordinate(coords[i], x[i]);
    return v;
  };
  auto coordinates_from_values = [&](std::span<const double> v) {
    std::vector<double> x(dim);
    for (int i = 0; i < dim; ++i) x[i] = to_coordinate(coords[i], v[i]);
    return x;
  };

  std::vector<Candidate> seeds;
  for (const auto& v : seeds_for(spec, panel, opts)) {
    // Seeds are evaluated where the search can actually reach them.
    const std::vector<double> reach = values_from_coordinates(coordinates_from_values(v));
    seeds.push_back({objective_values(reach), reach, false});
  }
  if (!is_hierarchical(spec) && opts.grid_points > 0) {
    std::vector<double> axis(opts.grid_points);
    for (int i = 0; i < opts.grid_points; ++i)
      axis[i] = opts.grid_points == 1 ? -2.0 : -8.0 + 12.0 * i / (opts.grid_points - 1);
    std::vector<int> idx(dim, 0);
    for (;;) {
      std::vector<double> x(dim);
      for (int d = 0; d < dim; ++d) x[d] = axis[idx[d]];
      const std::vector<double> v = values_from_coordinates(x);
      seeds.push_back({objective_values(v), v, false});
      int d = 0;
      while (d < dim && ++idx[d] == opts.grid_points) idx[d++] = 0;
      if (d == dim) break;
    }
  }
  std::sort(seeds.begin(), seeds.end(), better);

  std::vector<double> step(dim, 1.0);
  for (int i = 0; i < dim; ++i)
    if (coords[i] == Coord::real) step[i] = 0.5;
  Candidate best = seeds.front();
  const int starts = std::min<int>(opts.refine_starts, static_cast<int>(seeds.size()));
  for (int s = 0; s < starts; ++s) {
    if (!std::isfinite(seeds[s].value)) break;
    const SimplexResult r = minimize_simplex(
        [&](std::span<const double> x) { return objective_values(values_from_coordinates(x)); },
        coordinates_from_values(seeds[s].values), step, opts.simplex);
    Candidate c{r.value, values_from_coordinates(r.argmin), r.converged};
    for (int i = 0; i < dim; ++i) {
      if (coords[i] == Coord::real || std::abs(r.argmin[i]) < kBoundaryCoordinate) continue;
      const double edge = r.argmin[i] < 0.0 ? 0.0 : 1.0;
      if (edge == 1.0 && coords[i] != Coord::probability) continue;
      std::vector<double> v = c.values;
      v[i] = edge;
      const double f = objective_values(v);
      if (f <= c.value + 1e-9 * (1.0 + std::abs(c.value))) c = {std::min(f, c.value), v, c.converged};
    }
    if (better(c, best)) best = c;
  }

  FitResult out;
  out.spec = spec;
  out.params = from_values(spec, best.values);
  out.nll = objective_values(best.values);
  out.aic = 2.0 * out.nll + 2.0 * dim;
  out.converged = best.converged && std::isfinite(out.nll);
  for (int i = 0; i < dim; ++i) out.boundary = out.boundary || at_bound(coords[i], best.values[i]);
  return out;
}

AicSelection aic_select(std::span<const FitResult> fits) {
  if (fits.empty()) throw DomainError("aic_select: no fits");
  AicSelection out;
  const FitResult* win = &fits.front();
  for (const FitResult& f : fits) {
    out.table.emplace_back(f.spec, f.aic);
    const int kf = parameter_count(f.spec), kw = parameter_count(win->spec);
    // AIC values within rounding of each other count as tied.
    const bool tied = std::abs(f.aic - win->aic) <= 1e-9 * (1.0 + std::abs(win->aic));
    if (tied ? (kf < kw || (kf == kw && to_string(f.spec) < to_string(win->spec))) : f.aic < win->aic) win = &f;
  }
  out.winner = win->spec;
  return out;
}

}  // namespace defaultlab

#include "defaultlab/models.hpp"

#include <algorithm>
#include <cmath>

namespace defaultlab {

namespace {

// log Binomial(m, r; j) from log r and log(1-r), honouring 0^0 = 1.
double lbinom(int j, int m, double log_r, double log_1mr) {
  double out = log_choose(m, j);
  if (j > 0) {
    if (log_r == kLogZero) return kLogZero;
    out += j * log_r;
  }
  if (m - j > 0) {
    if (log_1mr == kLogZero) return kLogZero;
    out += (m - j) * log_1mr;
  }
  return out;
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kLogZero; }

// log(1 - exp(x)) for x <= 0.
double log1mexp(double x) {
  if (x == kLogZero) return 0.0;
  if (x >= 0.0) return kLogZero;
  return x > -0.6931471805599453 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// Contagion probability r_k = 1 - (1-q)^k in log form.
struct InfectionLogs {
  double log_r;
  double log_1mr;
};

InfectionLogs infection_logs(double q, int k) {
  if (k == 0 || q == 0.0) return {kLogZero, 0.0};
  if (q == 1.0) return {0.0, kLogZero};
  const double l = k * std::log1p(-q);
  return {log1mexp(l), l};
}

// Conditional laws of the Torri mixture.
struct TorriLogs {
  double log_pv, log_1mpv;   // seeds H ~ Bin(n, pv)
  double log_a0, log_1ma0;   // H = 0 branch rate p(1-v)/(1-pv)
  double log_s, log_1ms;     // H >= 1 branch rate
};

TorriLogs torri_logs(const Torri& t) {
  const double pv = t.p * t.v;
  TorriLogs L{};
  L.log_pv = safe_log(pv);
  L.log_1mpv = std::log1p(-pv);
  L.log_a0 = safe_log(t.p) + std::log1p(-t.v) - L.log_1mpv;
  if (t.p == 0.0 || t.v == 1.0) L.log_a0 = kLogZero;
  L.log_1ma0 = std::log1p(-t.p) - L.log_1mpv;
  L.log_s = safe_log(t.p * (1.0 - t.v) + (1.0 - t.p) * (1.0 - t.u)) - L.log_1mpv;
  L.log_1ms = std::log1p(-t.p) + safe_log(t.u) - L.log_1mpv;
  if (t.p == 1.0) L.log_1ms = kLogZero;
  L.log_s = std::min(L.log_s, 0.0);
  L.log_1ma0 = std::min(L.log_1ma0, 0.0);
  return L;
}

double torri_log_prob(const TorriLogs& L, int n, int h) {
  LogSumAccumulator acc;
  acc.add(lbinom(0, n, L.log_pv, L.log_1mpv) + lbinom(h, n, L.log_a0, L.log_1ma0));
  for (int k = 1; k <= h; ++k) {
    const double lw = lbinom(k, n, L.log_pv, L.log_1mpv);
    if (lw == kLogZero) continue;
    acc.add(lw + lbinom(h - k, n - k, L.log_s, L.log_1ms));
  }
  return acc.result();
}

double davis_lo_log_prob(const DavisLo& d, int n, int h, double log_p, double log_1mp) {
  LogSumAccumulator acc;
  for (int k = 0; k <= h; ++k) {
    const double lw = lbinom(k, n, log_p, log_1mp);
    if (lw == kLogZero) continue;
    const InfectionLogs r = infection_logs(d.q, k);
    acc.add(lw + lbinom(h - k, n - k, r.log_r, r.log_1mr));
  }
  return acc.result();
}

void check_n(int n) {
  if (n < 1) throw DomainError("pool size n must be >= 1");
}

// Vasicek mixture evaluated on a probit-scale rule at the requested counts.
std::vector<double> probit_mixture_log_probs(const QuadratureRule& rule, int n,
                                             std::span<const int> hs) {
  std::vector<LogSumAccumulator> acc(hs.size());
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i];
    const double lw = std::log(rule.weights[i]);
    const double lx = log_std_normal_cdf(z);
    const double l1x = log_std_normal_cdf(-z);
    for (std::size_t j = 0; j < hs.size(); ++j) acc[j].add(lw + lbinom(hs[j], n, lx, l1x));
  }
  std::vector<double> out(hs.size());
  for (std::size_t j = 0; j < hs.size(); ++j) out[j] = acc[j].result();
  return out;
}

// Binomial(m, r) probabilities on [0, jmax] scaled so the anchor (the mode,
// or the nearest point of the range) is 1, filled by recurrence outward.
// Returns the log of the anchor probability. Entries below 1e-300 of the
// anchor are left at zero.
double scaled_binomial_row(int m, double log_r, double log_1mr, int jmax, std::vector<double>& out) {
  out.assign(jmax + 1, 0.0);
  if (log_r == kLogZero) {
    out[0] = 1.0;
    return 0.0;
  }
  if (log_1mr == kLogZero) {
    if (m > jmax) return kLogZero;
    out[m] = 1.0;
    return 0.0;
  }
  const int top = std::min(m, jmax);
  const double r = std::exp(log_r);
  const int anchor = std::clamp(static_cast<int>(std::floor((m + 1) * r)), 0, top);
  const double odds = std::exp(log_r - log_1mr);
  out[anchor] = 1.0;
  for (int j = anchor; j < top && out[j] > 1e-300; ++j)
    out[j + 1] = out[j] * (static_cast<double>(m - j) / (j + 1)) * odds;
  for (int j = anchor; j > 0 && out[j] > 1e-300; --j)
    out[j - 1] = out[j] * (static_cast<double>(j) / (m - j + 1)) / odds;
  return lbinom(anchor, m, log_r, log_1mr);
}

std::vector<int> full_support(int n) {
  std::vector<int> hs(n + 1);
  for (int h = 0; h <= n; ++h) hs[h] = h;
  return hs;
}

}  // namespace

Family family_of(const ModelParams& params) {
  return static_cast<Family>(params.index());
}

std::string to_string(Family family) {
  switch (family) {
    case Family::davis_lo: return "davislo";
    case Family::torri: return "torri";
    case Family::vasicek: return "vasicek";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "davislo" || name == "davis_lo" || name == "davis-lo") return Family::davis_lo;
  if (name == "torri") return Family::torri;
  if (name == "vasicek") return Family::vasicek;
  throw DomainError("unknown model family '" + name + "'");
}

int parameter_count(Family family) { return family == Family::torri ? 3 : 2; }

void validate(const ModelParams& params) {
  auto prob = [](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0))
      throw DomainError(std::string(name) + " must lie in [0, 1], got " + std::to_string(x));
  };
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        prob(m.p, "p");
        if constexpr (std::is_same_v<T, DavisLo>) {
          prob(m.q, "q");
        } else if constexpr (std::is_same_v<T, Torri>) {
          prob(m.u, "u");
          prob(m.v, "v");
        } else {
          if (!(m.rho_a >= 0.0 && m.rho_a < 1.0))
            throw DomainError("rho_a must lie in [0, 1), got " + std::to_string(m.rho_a));
        }
      },
      params);
}

// ---------------------------------------------------------------------------

CountDistribution::CountDistribution(std::vector<double> log_pmf) : log_pmf_(std::move(log_pmf)) {
  if (log_pmf_.empty()) throw DomainError("CountDistribution: empty support");
  for (double v : log_pmf_)
    if (std::isnan(v) || v == kInf) throw NumericalError("CountDistribution: invalid log-probability");
  const double total = log_sum_exp(log_pmf_);
  if (!std::isfinite(total)) throw NumericalError("CountDistribution: zero total mass");
  for (double& v : log_pmf_) v = std::min(0.0, v - total);
}

CountDistribution CountDistribution::from_pmf(std::span<const double> pmf) {
  std::vector<double> lp(pmf.size());
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (!(pmf[i] >= 0.0)) throw DomainError("CountDistribution: negative probability");
    lp[i] = safe_log(pmf[i]);
  }
  return CountDistribution(std::move(lp));
}

std::vector<double> CountDistribution::pmf() const {
  std::vector<double> out(log_pmf_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_pmf_[i]);
  return out;
}

double CountDistribution::mean() const {
  double s = 0.0;
  for (std::size_t h = 0; h < log_pmf_.size(); ++h) s += h * std::exp(log_pmf_[h]);
  return s;
}

CountDistribution binomial_distribution(int n, double p) {
  check_n(n);
  std::vector<double> lp(n + 1);
  for (int h = 0; h <= n; ++h) lp[h] = log_binomial_pmf(h, n, p);
  return CountDistribution(std::move(lp));
}

CountDistribution point_mass(int n, int h) {
  if (n < 0 || h < 0 || h > n) throw DomainError("point_mass: need 0 <= h <= n");
  std::vector<double> lp(n + 1, kLogZero);
  lp[h] = 0.0;
  return CountDistribution(std::move(lp));
}

CountDistribution davis_lo_pmf(const DavisLo& params, int n) {
  check_n(n);
  validate(params);
  const double log_p = safe_log(params.p);
  const double log_1mp = std::log1p(-params.p);
  std::vector<LogSumAccumulator> acc(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double lw = lbinom(k, n, log_p, params.p == 1.0 ? kLogZero : log_1mp);
    if (lw == kLogZero) continue;
    const InfectionLogs r = infection_logs(params.q, k);
    for (int j = 0; j <= n - k; ++j) acc[k + j].add(lw + lbinom(j, n - k, r.log_r, r.log_1mr));
  }
  std::vector<double> lp(n + 1);
  for (int h = 0; h <= n; ++h) lp[h] = acc[h].result();
  return CountDistribution(std::move(lp));
}

CountDistribution torri_pmf(const Torri& params, int n) {
  check_n(n);
  validate(params);
  if (params.p * params.v >= 1.0) return point_mass(n, n);
  const TorriLogs L = torri_logs(params);
  std::vector<LogSumAccumulator> acc(n + 1);
  const double lw0 = lbinom(0, n, L.log_pv, L.log_1mpv);
  for (int h = 0; h <= n; ++h) acc[h].add(lw0 + lbinom(h, n, L.log_a0, L.log_1ma0));
  for (int k = 1; k <= n; ++k) {
    const double lw = lbinom(k, n, L.log_pv, L.log_1mpv);
    if (lw == kLogZero) continue;
    for (int j = 0; j <= n - k; ++j) acc[k + j].add(lw + lbinom(j, n - k, L.log_s, L.log_1ms));
  }
  std::vector<double> lp(n + 1);
  for (int h = 0; h <= n; ++h) lp[h] = acc[h].result();
  return CountDistribution(std::move(lp));
}

CountDistribution torri_pmf_mgf(const Torri& params, int n) {
  check_n(n);
  validate(params);
  const double p = params.p, u = params.u, v = params.v;
  const double log_a = safe_log(p * (1.0 - v));
  const double log_bc = std::log1p(-p);
  const double log_c = safe_log((1.0 - p) * u);
  const double log_pb = safe_log(p + (1.0 - p) * (1.0 - u));
  const double log_ab = safe_log(p * (1.0 - v) + (1.0 - p) * (1.0 - u));
  auto lpow = [](double log_x, int e) {
    if (e == 0) return 0.0;
    return log_x == kLogZero ? kLogZero : e * log_x;
  };
  std::vector<double> lp(n + 1);
  for (int h = 0; h <= n; ++h) {
    const double t1 = lpow(log_a, h) + lpow(log_bc, n - h);
    const double t2 = lpow(log_pb, h) + lpow(log_c, n - h);
    const double t3 = lpow(log_ab, h) + lpow(log_c, n - h);
    // t2 >= t3 since p + b >= a + b; subtract in log space.
    double diff = kLogZero;
    if (t2 != kLogZero) diff = t3 == kLogZero ? t2 : t2 + log1mexp(std::min(0.0, t3 - t2));
    LogSumAccumulator acc;
    acc.add(t1);
    acc.add(diff);
    lp[h] = log_choose(n, h) + acc.result();
  }
  return CountDistribution(std::move(lp));
}

double conditional_vasicek_rate(double p, double rho_a, double f) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("conditional_vasicek_rate: p must lie in (0, 1)");
  if (!(rho_a >= 0.0 && rho_a < 1.0)) throw DomainError("conditional_vasicek_rate: rho_a must lie in [0, 1)");
  return std_normal_cdf((std_normal_quantile(p) - std::sqrt(rho_a) * f) / std::sqrt(1.0 - rho_a));
}

CountDistribution vasicek_pmf(const Vasicek& params, int n, const QuadratureOptions& opts) {
  check_n(n);
  validate(params);
  if (params.p == 0.0) return point_mass(n, 0);
  if (params.p == 1.0) return point_mass(n, n);
  if (params.rho_a == 0.0) return binomial_distribution(n, params.p);
  const double a = std_normal_quantile(params.p) / std::sqrt(1.0 - params.rho_a);
  const double s = std::sqrt(params.rho_a / (1.0 - params.rho_a));
  const std::vector<int> hs = full_support(n);
  CountDistribution out(probit_mixture_log_probs(probit_mixture_rule(a, s, n, opts.resolution), n, hs));
  if (opts.verify) {
    const CountDistribution fine(
        probit_mixture_log_probs(probit_mixture_rule(a, s, n, 0.5 * opts.resolution), n, hs));
    for (int h = 0; h <= n; ++h)
      if (std::abs(out.pmf(h) - fine.pmf(h)) > opts.verify_tol)
        throw NumericalError("vasicek_pmf: quadrature did not converge");
  }
  return out;
}

CountDistribution vasicek_pmf(const Vasicek& params, int n, const QuadratureRule& rule) {
  check_n(n);
  validate(params);
  if (params.p == 0.0) return point_mass(n, 0);
  if (params.p == 1.0) return point_mass(n, n);
  if (rule.kind == QuadratureKind::fixed_grid)
    return CountDistribution(probit_mixture_log_probs(rule, n, full_support(n)));
  QuadratureRule z = rule;
  z.kind = QuadratureKind::fixed_grid;
  const double c = std_normal_quantile(params.p);
  for (double& node : z.nodes)
    node = (c - std::sqrt(params.rho_a) * node) / std::sqrt(1.0 - params.rho_a);
  return CountDistribution(probit_mixture_log_probs(z, n, full_support(n)));
}

ContagionState activation_probability(const Torri& params, int n) {
  check_n(n);
  validate(params);
  return {-std::expm1(n * std::log1p(-params.p * params.v))};
}

CountDistribution model_pmf(const ModelParams& params, int n, const QuadratureOptions& opts) {
  return std::visit(
      [&](const auto& m) -> CountDistribution {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DavisLo>) return davis_lo_pmf(m, n);
        else if constexpr (std::is_same_v<T, Torri>) return torri_pmf(m, n);
        else return vasicek_pmf(m, n, opts);
      },
      params);
}

std::vector<double> log_probs(const ModelParams& params, int n, std::span<const int> hs,
                              const QuadratureOptions& opts) {
  check_n(n);
  validate(params);
  for (int h : hs)
    if (h < 0 || h > n) throw DomainError("log_probs: count outside [0, n]");
  std::vector<double> out(hs.size());
  if (const auto* d = std::get_if<DavisLo>(&params)) {
    const double log_p = safe_log(d->p);
    const double log_1mp = d->p == 1.0 ? kLogZero : std::log1p(-d->p);
    for (std::size_t i = 0; i < hs.size(); ++i) out[i] = davis_lo_log_prob(*d, n, hs[i], log_p, log_1mp);
  } else if (const auto* t = std::get_if<Torri>(&params)) {
    if (t->p * t->v >= 1.0) {
      for (std::size_t i = 0; i < hs.size(); ++i) out[i] = hs[i] == n ? 0.0 : kLogZero;
    } else {
      const TorriLogs L = torri_logs(*t);
      for (std::size_t i = 0; i < hs.size(); ++i) out[i] = torri_log_prob(L, n, hs[i]);
    }
  } else {
    const auto& v = std::get<Vasicek>(params);
    if (v.p == 0.0 || v.p == 1.0 || v.rho_a == 0.0) {
      for (std::size_t i = 0; i < hs.size(); ++i) out[i] = log_binomial_pmf(hs[i], n, v.p);
    } else {
      const double a = std_normal_quantile(v.p) / std::sqrt(1.0 - v.rho_a);
      const double s = std::sqrt(v.rho_a / (1.0 - v.rho_a));
      out = probit_mixture_log_probs(probit_mixture_rule(a, s, n, opts.resolution), n, hs);
    }
  }
  return out;
}

namespace {

// log P(L = h) from the generating-function expansion; O(1) per count.
struct TorriClosedForm {
  double log_a, log_1mp, log_c, log_pb, log_ab;

  explicit TorriClosedForm(const Torri& t)
      : log_a(safe_log(t.p * (1.0 - t.v))),
        log_1mp(std::log1p(-t.p)),
        log_c(safe_log((1.0 - t.p) * t.u)),
        log_pb(safe_log(t.p + (1.0 - t.p) * (1.0 - t.u))),
        log_ab(safe_log(t.p * (1.0 - t.v) + (1.0 - t.p) * (1.0 - t.u))) {}

  static double lpow(double log_x, int e) {
    if (e == 0) return 0.0;
    return log_x == kLogZero ? kLogZero : e * log_x;
  }

  double operator()(int n, int h) const {
    const double t1 = lpow(log_a, h) + lpow(log_1mp, n - h);
    const double t2 = lpow(log_pb, h) + lpow(log_c, n - h);
    const double t3 = lpow(log_ab, h) + lpow(log_c, n - h);
    double diff = kLogZero;
    if (t2 != kLogZero) diff = t3 == kLogZero ? t2 : t2 + log1mexp(std::min(0.0, t3 - t2));
    LogSumAccumulator acc;
    acc.add(t1);
    acc.add(diff);
    return log_choose(n, h) + acc.result();
  }
};

}  // namespace

std::vector<std::vector<double>> log_probs_over_p(const ModelParams& params, int n,
                                                  std::span<const int> hs,
                                                  std::span<const double> ps) {
  check_n(n);
  if (std::holds_alternative<Vasicek>(params))
    throw DomainError("log_probs_over_p: Davis-Lo or Torri only");
  int top = 0;
  for (int h : hs) {
    if (h < 0 || h > n) throw DomainError("log_probs_over_p: count outside [0, n]");
    top = std::max(top, h);
  }
  std::vector<std::vector<double>> out(ps.size(), std::vector<double>(hs.size()));

  if (const auto* t = std::get_if<Torri>(&params)) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Torri ti{ps[i], t->u, t->v};
      validate(ti);
      if (ti.p * ti.v >= 1.0) {
        for (std::size_t j = 0; j < hs.size(); ++j) out[i][j] = hs[j] == n ? 0.0 : kLogZero;
        continue;
      }
      const TorriClosedForm f(ti);
      for (std::size_t j = 0; j < hs.size(); ++j) out[i][j] = f(n, hs[j]);
    }
    return out;
  }

  const DavisLo& d = std::get<DavisLo>(params);
  validate(DavisLo{0.5, d.q});
  // Contagion kernel E[k][j] = Bin(n-k, r_k; j), independent of p.
  std::vector<std::vector<double>> kernel(top + 1);
  for (int k = 0; k <= top; ++k) {
    const InfectionLogs r = infection_logs(d.q, k);
    kernel[k].resize(top - k + 1);
    for (int j = 0; j <= top - k; ++j) kernel[k][j] = std::exp(lbinom(j, n - k, r.log_r, r.log_1mr));
  }
  std::vector<double> lb(top + 1), b(top + 1);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double p = ps[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("log_probs_over_p: p outside [0, 1]");
    const double log_p = safe_log(p);
    const double log_1mp = p == 1.0 ? kLogZero : std::log1p(-p);
    double top_lb = kLogZero;
    for (int k = 0; k <= top; ++k) {
      lb[k] = lbinom(k, n, log_p, log_1mp);
      top_lb = std::max(top_lb, lb[k]);
    }
    for (int k = 0; k <= top; ++k) b[k] = top_lb == kLogZero ? 0.0 : std::exp(lb[k] - top_lb);
    for (std::size_t j = 0; j < hs.size(); ++j) {
      const int h = hs[j];
      double s = 0.0;
      for (int k = 0; k <= h; ++k) s += b[k] * kernel[k][h - k];
      // Exact log-space sum when every product underflowed.
      out[i][j] = s > 0.0 ? std::log(s) + top_lb : davis_lo_log_prob(d, n, h, log_p, log_1mp);
    }
  }
  return out;
}

std::vector<double> mixture_log_probs_over_p(const ModelParams& params, int n,
                                             std::span<const int> hs, std::span<const double> ps,
                                             std::span<const double> weights) {
  check_n(n);
  if (ps.size() != weights.size()) throw DomainError("mixture_log_probs_over_p: size mismatch");
  if (std::holds_alternative<Vasicek>(params))
    throw DomainError("mixture_log_probs_over_p: Davis-Lo or Torri only");
  int top = 0;
  for (int h : hs) {
    if (h < 0 || h > n) throw DomainError("mixture_log_probs_over_p: count outside [0, n]");
    top = std::max(top, h);
  }
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (!(ps[i] >= 0.0 && ps[i] <= 1.0) || !(weights[i] >= 0.0))
      throw DomainError("mixture_log_probs_over_p: bad node");
  std::vector<LogSumAccumulator> logs(hs.size());

  if (const auto* t = std::get_if<Torri>(&params)) {
    validate(Torri{0.5, t->u, t->v});
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (weights[i] == 0.0) continue;
      const double lw = std::log(weights[i]);
      const Torri ti{ps[i], t->u, t->v};
      if (ti.p * ti.v >= 1.0) {
        for (std::size_t j = 0; j < hs.size(); ++j)
          if (hs[j] == n) logs[j].add(lw);
        continue;
      }
      const TorriClosedForm f(ti);
      for (std::size_t j = 0; j < hs.size(); ++j) logs[j].add(lw + f(n, hs[j]));
    }
    std::vector<double> out(hs.size());
    for (std::size_t j = 0; j < hs.size(); ++j) out[j] = logs[j].result();
    return out;
  }

  const DavisLo& d = std::get<DavisLo>(params);
  validate(DavisLo{0.5, d.q});
  // Contagion rows Bin(n-k, r_k; .) in linear scale, built on first use.
  std::vector<std::vector<double>> rows(top + 1);
  std::vector<double> scratch;
  auto row = [&](int k) -> const std::vector<double>& {
    if (rows[k].empty()) {
      const InfectionLogs r = infection_logs(d.q, k);
      const double la = scaled_binomial_row(n - k, r.log_r, r.log_1mr, top - k, scratch);
      const double scale = la == kLogZero ? 0.0 : std::exp(la);
      rows[k].resize(top - k + 1);
      for (int j = 0; j <= top - k; ++j) rows[k][j] = scratch[j] * scale;
    }
    return rows[k];
  };
  // Pass 1 sums each node over seeds whose weight is at least 1e-17 of the
  // anchor and keeps a bound on what the skipped seeds could add.
  const std::size_t nodes = ps.size();
  std::vector<std::vector<double>> b(nodes);
  std::vector<double> node_lw(nodes, kLogZero);
  std::vector<double> linear(hs.size(), 0.0), bound(hs.size(), 0.0);
  for (std::size_t i = 0; i < nodes; ++i) {
    if (weights[i] == 0.0) continue;
    const double p = ps[i];
    const double la = scaled_binomial_row(n, safe_log(p), p == 1.0 ? kLogZero : std::log1p(-p), top, b[i]);
    if (la == kLogZero) continue;
    node_lw[i] = std::log(weights[i]) + la;
    const std::vector<double>& bi = b[i];
    int klo = 0, khi = top;
    while (klo < top && bi[klo] < 1e-17) ++klo;
    while (khi > klo && bi[khi] < 1e-17) --khi;
    double skipped = 0.0;
    for (int k = 0; k <= top; ++k)
      if (k < klo || k > khi) skipped += bi[k];
    const double scale = std::exp(node_lw[i]);
    for (std::size_t j = 0; j < hs.size(); ++j) {
      const int h = hs[j];
      double s = 0.0;
      for (int k = klo; k <= std::min(h, khi); ++k) s += bi[k] * row(k)[h - k];
      if (node_lw[i] > -600.0) linear[j] += scale * s;
      else if (s > 0.0) logs[j].add(node_lw[i] + std::log(s));
      bound[j] += scale * skipped;
    }
  }
  // Pass 2 redoes, in log space, every count where the skipped seeds or
  // underflow could matter.
  std::vector<double> out(hs.size());
  for (std::size_t j = 0; j < hs.size(); ++j) {
    logs[j].add(safe_log(linear[j]));
    out[j] = logs[j].result();
    if (out[j] > -575.0 && bound[j] <= 1e-13 * std::exp(out[j])) continue;
    const int h = hs[j];
    LogSumAccumulator exact;
    for (std::size_t i = 0; i < nodes; ++i) {
      if (node_lw[i] == kLogZero) continue;
      double s = 0.0;
      for (int k = 0; k <= h; ++k)
        if (b[i][k] > 0.0) s += b[i][k] * row(k)[h - k];
      if (s > 0.0) {
        exact.add(node_lw[i] + std::log(s));
      } else {
        const double p = ps[i];
        exact.add(std::log(weights[i]) +
                  davis_lo_log_prob(d, n, h, safe_log(p), p == 1.0 ? kLogZero : std::log1p(-p)));
      }
    }
    out[j] = exact.result();
  }
  return out;
}

ModelParams with_p(const ModelParams& params, double p) {
  ModelParams out = params;
  std::visit([p](auto& m) { m.p = p; }, out);
  return out;
}

double base_p(const ModelParams& params) {
  return std::visit([](const auto& m) { return m.p; }, params);
}

}  // namespace defaultlab

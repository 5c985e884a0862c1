#include "defaultlab/numerics.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <numeric>
#include <string>

namespace defaultlab {

namespace {

constexpr int kFactorialTable = 1 << 16;

const std::vector<double>& factorial_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kFactorialTable);
    t[0] = 0.0;
    // Summing logs accumulates ~k ulps of error; lgamma is exact to an ulp.
    for (int k = 1; k < kFactorialTable; ++k) t[k] = std::lgamma(k + 1.0);
    return t;
  }();
  return table;
}

}  // namespace

double log_factorial(int k) {
  if (k < 0) throw DomainError("log_factorial: negative argument");
  if (k < kFactorialTable) return factorial_table()[k];
  return std::lgamma(k + 1.0);
}

double log_choose(int n, int k) {
  if (k < 0 || k > n) throw DomainError("log_choose: k outside [0, n]");
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double log_binomial_pmf(int k, int n, double p) {
  if (n < 0 || k < 0 || k > n) throw DomainError("log_binomial_pmf: need 0 <= k <= n");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("log_binomial_pmf: p outside [0, 1]");
  if (p == 0.0) return k == 0 ? 0.0 : kLogZero;
  if (p == 1.0) return k == n ? 0.0 : kLogZero;
  return log_binomial_pmf_unchecked(k, n, std::log(p), std::log1p(-p));
}

double log_sum_exp(std::span<const double> values) {
  LogSumAccumulator acc;
  for (double v : values) acc.add(v);
  return acc.result();
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_std_normal_cdf(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Mills-ratio series; erfc underflows below about -37.5.
  const double z2 = 1.0 / (x * x);
  const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-x) + std::log(series);
}

double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("std_normal_quantile: u must lie in (0, 1)");
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (u < p_low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - p_low) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement. In the upper tail work with the complement so the
  // residual keeps its relative precision.
  for (int it = 0; it < 2; ++it) {
    const double e = x < 0.0 ? std_normal_cdf(x) - u : (1.0 - u) - std_normal_cdf(-x);
    const double t = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= t / (1.0 + 0.5 * x * t);
  }
  return x;
}

// ---------------------------------------------------------------------------

QuadratureRule gauss_hermite(int order) {
  if (order < 2 || order > 256) throw DomainError("gauss_hermite: order must be in [2, 256]");
  const int n = order;
  std::vector<double> x(n), w(n);
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  const int m = (n + 1) / 2;
  // Initial guesses are eigenvalues of the Jacobi matrix (zero diagonal,
  // off-diagonal sqrt(k/2)) isolated by Sturm-sequence bisection, which
  // cannot skip or repeat a root. Newton on the orthonormal recurrence then
  // polishes each node and yields its weight.
  auto count_below = [n](double t) {
    int count = 0;
    double d = -t;
    if (d < 0.0) ++count;
    for (int k = 1; k < n; ++k) {
      if (d == 0.0) d = 1e-300;
      d = -t - 0.5 * k / d;
      if (d < 0.0) ++count;
    }
    return count;
  };
  const double bound = std::sqrt(2.0 * n + 1.0) + 1.0;
  for (int i = 0; i < m; ++i) {
    // i-th largest root: exactly n - 1 - i eigenvalues below it.
    double lo = 0.0 - 1e-12, hi = bound;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(mid) > n - 1 - i) hi = mid; else lo = mid;
    }
    double z = 0.5 * (lo + hi);
    double pp = 0.0;
    for (int it = 0; it < 8; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double step = p1 / pp;
      z -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  if (n % 2 == 1) x[m - 1] = 0.0;

  QuadratureRule rule;
  rule.kind = QuadratureKind::gauss_hermite_probabilist;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Store ascending and rescale from exp(-x^2) to the standard normal density.
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = x[n - 1 - i] * std::numbers::sqrt2;
    rule.weights[i] = w[n - 1 - i];
    total += rule.weights[i];
  }
  for (double& wi : rule.weights) wi /= total;
  return rule;
}

namespace {

struct LegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

LegendreRule gauss_legendre(int n) {
  LegendreRule r{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-16) break;
    }
    r.nodes[i] = -z;
    r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return r;
}

const LegendreRule& panel_rule() {
  static const LegendreRule rule = gauss_legendre(10);
  return rule;
}

// Standard deviation of Binomial(n, Phi(z))/n, expressed as a width in z.
double kernel_width(double z, int n) {
  const double log_x = log_std_normal_cdf(z);
  const double log_1mx = log_std_normal_cdf(-z);
  const double log_phi = -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  return std::exp(0.5 * (log_x + log_1mx - std::log(static_cast<double>(n))) - log_phi);
}

}  // namespace

QuadratureRule probit_mixture_rule(double mean, double sd, int pool_size, double resolution) {
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DomainError("probit_mixture_rule: sd must be positive");
  if (pool_size < 1) throw DomainError("probit_mixture_rule: pool_size must be >= 1");
  if (!(resolution > 0.0)) throw DomainError("probit_mixture_rule: resolution must be positive");
  if (!std::isfinite(mean)) throw DomainError("probit_mixture_rule: mean must be finite");

  constexpr double kEdge = 40.0;
  constexpr double kSpan = 9.5;
  constexpr double kMaxPanel = 2.0;

  QuadratureRule rule;
  rule.kind = QuadratureKind::fixed_grid;

  const double lo = std::max(mean - kSpan * sd, -kEdge);
  const double hi = std::min(mean + kSpan * sd, kEdge);
  // Mass beyond +-40 sits where Phi(z) is exactly 0 or 1.
  const double lower_tail = std_normal_cdf((-kEdge - mean) / sd);
  const double upper_tail = std_normal_cdf((mean - kEdge) / sd);
  if (lower_tail > 0.0) {
    rule.nodes.push_back(-kEdge - 1.0);
    rule.weights.push_back(lower_tail);
  }

  if (lo < hi) {
    const LegendreRule& gl = panel_rule();
    const double norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
    double a = lo;
    while (a < hi) {
      double width = resolution * std::min({sd, kernel_width(a, pool_size), kMaxPanel});
      const double b_try = std::min(a + width, hi);
      width = std::min(width, resolution * kernel_width(b_try, pool_size));
      const double b = (hi - a <= width * 1.000001) ? hi : a + width;
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double z = mid + half * gl.nodes[i];
        const double t = (z - mean) / sd;
        rule.nodes.push_back(z);
        rule.weights.push_back(half * gl.weights[i] * norm * std::exp(-0.5 * t * t));
      }
      a = b;
    }
  }

  if (upper_tail > 0.0) {
    rule.nodes.push_back(kEdge + 1.0);
    rule.weights.push_back(upper_tail);
  }
  if (rule.nodes.size() < 2) {
    // Entire mass on one side of the edge: duplicate the node so the rule
    // keeps its two-node minimum.
    rule.nodes.push_back(rule.nodes.front());
    rule.weights.front() *= 0.5;
    rule.weights.push_back(rule.weights.front());
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

// ---------------------------------------------------------------------------

ScalarMinimum minimize_scalar(const std::function<double(double)>& f, double lo, double hi,
                              double tol) {
  if (!(lo < hi)) throw DomainError("minimize_scalar: need lo < hi");
  auto eval = [&](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw NumericalError("minimize_scalar: non-finite objective at x=" +
                                                std::to_string(x));
    return v;
  };

  constexpr double cgold = 0.3819660112501051;
  const double t = std::max(tol, 1e-15) / 3.0;
  double a = lo, b = hi;
  double x = a + cgold * (b - a), w = x, v = x;
  double fx = eval(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = t + 1e-15 * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = cgold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = eval(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  ScalarMinimum best{x, fx};
  const double flo = eval(lo);
  if (flo <= best.value) best = {lo, flo};
  const double fhi = eval(hi);
  if (fhi < best.value) best = {hi, fhi};
  return best;
}

double find_root(const std::function<double(double)>& f, double lo, double hi, double x_tol,
                 int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (std::isnan(flo) || std::isnan(fhi)) throw NumericalError("find_root: NaN at bracket end");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("find_root: root not bracketed");
  for (int it = 0; it < max_iter && hi - lo > x_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (std::isnan(fm)) throw NumericalError("find_root: NaN inside bracket");
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

namespace {

struct SimplexRun {
  std::vector<double> x;
  double f;
  bool converged;
};

SimplexRun nelder_mead(const Objective& f, const std::vector<double>& x0, double f0,
                       const std::vector<double>& scale, const SimplexOptions& opts, int& evals) {
  const std::size_t d = x0.size();
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(std::span<const double>(x));
    return std::isfinite(v) ? v : kInf;
  };

  std::vector<std::vector<double>> pts(d + 1, x0);
  std::vector<double> fv(d + 1, f0);
  for (std::size_t i = 0; i < d; ++i) {
    pts[i + 1][i] += scale[i];
    fv[i + 1] = eval(pts[i + 1]);
  }

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), xr(d), xe(d), xc(d);
  bool converged = false;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];

    double fspread = fv[worst] - fv[best];
    if (!std::isfinite(fspread)) fspread = kInf;
    double xspread = 0.0;
    for (std::size_t i = 0; i <= d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        xspread = std::max(xspread, std::abs(pts[i][j] - pts[best][j]));
    if (fspread == 0.0 || (fspread <= opts.f_tol && xspread <= opts.x_tol)) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j] / static_cast<double>(d);
    }
    for (std::size_t j = 0; j < d; ++j) xr[j] = centroid[j] + (centroid[j] - pts[worst][j]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      for (std::size_t j = 0; j < d; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - pts[worst][j]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    for (std::size_t j = 0; j < d; ++j)
      xc[j] = outside ? centroid[j] + 0.5 * (xr[j] - centroid[j])
                      : centroid[j] + 0.5 * (pts[worst][j] - centroid[j]);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      pts[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < d; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      fv[i] = eval(pts[i]);
    }
  }
  const std::size_t best =
      static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {pts[best], fv[best], converged};
}

}  // namespace

SimplexResult minimize_simplex(const Objective& f, std::vector<double> x0,
                               std::vector<double> scale, const SimplexOptions& opts) {
  if (x0.empty() || x0.size() != scale.size())
    throw DomainError("minimize_simplex: x0 and scale must have equal non-zero length");
  SimplexResult out;
  out.argmin = x0;
  const double v0 = f(std::span<const double>(x0));
  out.evaluations = 1;
  out.value = std::isfinite(v0) ? v0 : kInf;

  SimplexRun run = nelder_mead(f, out.argmin, out.value, scale, opts, out.evaluations);
  out.argmin = run.x;
  out.value = run.f;
  out.converged = run.converged;
  for (int r = 0; r < opts.restarts; ++r) {
    run = nelder_mead(f, out.argmin, out.value, scale, opts, out.evaluations);
    const double gain = out.value - run.f;
    if (run.f < out.value) {
      out.argmin = run.x;
      out.value = run.f;
    }
    out.converged = run.converged;
    if (!(gain > opts.f_tol)) break;
  }
  return out;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("logit: p outside [0, 1]");
  return std::log(p) - std::log1p(-p);
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double inverse_softplus(double y) {
  if (!(y >= 0.0)) throw DomainError("inverse_softplus: y must be non-negative");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

}  // namespace defaultlab

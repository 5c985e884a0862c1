#include "defaultlab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace defaultlab {

Rng::Rng(RngSpec spec) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(spec.stream), static_cast<std::uint32_t>(spec.stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double Rng::normal() { return std_normal_quantile(uniform()); }

int Rng::binomial(int n, double p) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0)) throw DomainError("binomial: bad arguments");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);
  const double odds = p / (1.0 - p);
  const int mode = std::min(n, static_cast<int>(std::floor((n + 1) * p)));
  double u = uniform();
  double down = std::exp(log_binomial_pmf(mode, n, p));
  double up = down;
  int lo = mode, hi = mode;
  u -= down;
  if (u <= 0.0) return mode;
  for (;;) {
    const bool can_up = hi < n, can_down = lo > 0;
    if (!can_up && !can_down) return mode;  // rounding leftover
    if (can_up) {
      up *= static_cast<double>(n - hi) / (hi + 1) * odds;
      ++hi;
      u -= up;
      if (u <= 0.0) return hi;
    }
    if (can_down) {
      down *= static_cast<double>(lo) / (n - lo + 1) / odds;
      --lo;
      u -= down;
      if (u <= 0.0) return lo;
    }
  }
}

int simulate_count(const ModelParams& params, int n, Rng& rng) {
  validate(params);
  if (n < 1) throw DomainError("pool size n must be >= 1");
  if (const auto* d = std::get_if<DavisLo>(&params)) {
    const int k = rng.binomial(n, d->p);
    if (k == 0 || k == n) return k;
    const double r = d->q == 1.0 ? 1.0 : -std::expm1(k * std::log1p(-d->q));
    return k + rng.binomial(n - k, r);
  }
  if (const auto* t = std::get_if<Torri>(&params)) {
    const double pv = t->p * t->v;
    if (pv >= 1.0) return n;
    const int seeds = rng.binomial(n, pv);
    if (seeds == 0) return rng.binomial(n, std::min(1.0, t->p * (1.0 - t->v) / (1.0 - pv)));
    const double s = std::min(1.0, (t->p * (1.0 - t->v) + (1.0 - t->p) * (1.0 - t->u)) / (1.0 - pv));
    return seeds + rng.binomial(n - seeds, s);
  }
  const auto& v = std::get<Vasicek>(params);
  return rng.binomial(n, conditional_vasicek_rate(v.p, v.rho_a, rng.normal()));
}

int simulate_count(const ModelParams& params, int n, RngSpec spec) {
  Rng rng(spec);
  return simulate_count(params, n, rng);
}

Panel simulate_panel(const ModelParams& params, std::span<const int> pool_sizes, RngSpec spec, int first_year,
                     const std::string& class_label) {
  Rng rng(spec);
  std::vector<YearRecord> records;
  for (std::size_t t = 0; t < pool_sizes.size(); ++t)
    records.push_back({first_year + static_cast<int>(t), pool_sizes[t], simulate_count(params, pool_sizes[t], rng),
                       class_label});
  return Panel(std::move(records));
}

Panel simulate_hier_panel(const HierParams& hp, std::span<const int> pool_sizes, RngSpec spec, int first_year,
                          const std::string& class_label) {
  validate(hp);
  Rng rng(spec);
  std::vector<YearRecord> records;
  for (std::size_t t = 0; t < pool_sizes.size(); ++t) {
    const double p = std_normal_cdf(hp.mu + hp.sigma * rng.normal());
    const int n = pool_sizes[t];
    records.push_back({first_year + static_cast<int>(t), n, simulate_count(conditional_model(hp, p), n, rng),
                       class_label});
  }
  return Panel(std::move(records));
}

int worker_count() {
  int want = 0;
  if (const char* env = std::getenv("DEFAULTLAB_THREADS")) want = std::atoi(env);
  if (want <= 0) want = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, want);
}

void parallel_for(int count, const std::function<void(int)>& body) {
  const int workers = std::min(worker_count(), std::max(count, 1));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ConfusionMatrix identifiability_experiment(std::span<const NamedTarget> targets, int n, int T, int R,
                                           std::uint64_t seed, const FitOptions& opts) {
  if (n < 1 || T < 1 || R < 1) throw DomainError("identifiability_experiment: n, T and R must be >= 1");
  const std::vector<Spec> families{Spec::torri, Spec::davis_lo, Spec::vasicek};
  ConfusionMatrix cm;
  cm.cols = {to_string(Spec::torri), to_string(Spec::davis_lo), to_string(Spec::vasicek)};
  cm.replications = R;
  cm.sample_size = T;
  cm.pool_size = n;
  const int rows = static_cast<int>(targets.size());
  // Selected column per job, -1 when a fit failed; flag for flagged fits.
  std::vector<int> pick(static_cast<std::size_t>(rows) * R, -1);
  std::vector<char> flagged(pick.size(), 0);
  const std::vector<int> pools(T, n);
  parallel_for(static_cast<int>(pick.size()), [&](int job) {
    const int i = job / R, r = job % R;
    const RngSpec rs{seed, (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(r)};
    const Panel panel = simulate_panel(targets[i].params, pools, rs);
    std::vector<FitResult> fits;
    for (Spec s : families) {
      FitResult f;
      try {
        f = fit(s, panel, opts);
      } catch (const std::exception&) {
        return;
      }
      if (!std::isfinite(f.nll)) return;
      if (!f.converged) flagged[job] = 1;
      fits.push_back(f);
    }
    const Spec w = aic_select(fits).winner;
    pick[job] = static_cast<int>(std::find(families.begin(), families.end(), w) - families.begin());
  });
  for (int i = 0; i < rows; ++i) {
    cm.rows.push_back(targets[i].name);
    std::vector<int> c(families.size(), 0);
    int failed = 0, nc = 0;
    for (int r = 0; r < R; ++r) {
      const std::size_t job = static_cast<std::size_t>(i) * R + r;
      if (pick[job] < 0) ++failed;
      else ++c[pick[job]];
      nc += flagged[job];
    }
    const int good = R - failed;
    std::vector<double> rate(families.size(), 0.0);
    for (std::size_t j = 0; j < families.size(); ++j) rate[j] = good > 0 ? static_cast<double>(c[j]) / good : 0.0;
    cm.counts.push_back(c);
    cm.rates.push_back(rate);
    cm.failures.push_back(failed);
    cm.nonconverged.push_back(nc);
  }
  return cm;
}

}  // namespace defaultlab

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "defaultlab/simulate.hpp"

using namespace defaultlab;

namespace {

Panel from_counts(const std::vector<std::pair<int, int>>& nl) {
  std::vector<YearRecord> r;
  for (std::size_t i = 0; i < nl.size(); ++i) r.push_back({2000 + static_cast<int>(i), nl[i].first, nl[i].second, "ALL"});
  return Panel(std::move(r));
}

std::vector<int> alternating(int years) {
  std::vector<int> pools;
  for (int t = 0; t < years; ++t) pools.push_back(t % 2 ? 220 : 180);
  return pools;
}

}  // namespace

TEST_CASE("tags and parameter counts") {
  for (Spec s : {Spec::davis_lo, Spec::torri, Spec::vasicek, Spec::hier_davis_lo, Spec::hier_torri})
    CHECK(spec_from_string(to_string(s)) == s);
  CHECK(parameter_count(Spec::davis_lo) == 2);
  CHECK(parameter_count(Spec::torri) == 3);
  CHECK(parameter_count(Spec::vasicek) == 2);
  CHECK(parameter_count(Spec::hier_davis_lo) == 3);
  CHECK(parameter_count(Spec::hier_torri) == 4);
  CHECK_THROWS_AS(spec_from_string("gumbel"), DomainError);
}

TEST_CASE("single year without contagion is a binomial likelihood") {
  const Panel p = from_counts({{150, 4}});
  CHECK(nll(Spec::davis_lo, ModelParams{DavisLo{0.02, 0.0}}, p) ==
        doctest::Approx(-log_binomial_pmf(4, 150, 0.02)).epsilon(1e-13));
}

TEST_CASE("nll is invariant under reordering of years") {
  const std::vector<std::pair<int, int>> nl{{100, 2}, {120, 0}, {90, 7}, {100, 3}, {140, 1}};
  std::vector<std::pair<int, int>> shuffled = nl;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[1], shuffled[3]);
  const std::vector<std::pair<Spec, FitParams>> cases{
      {Spec::davis_lo, ModelParams{DavisLo{0.01, 0.02}}},
      {Spec::torri, ModelParams{Torri{0.01, 0.7, 0.1}}},
      {Spec::vasicek, ModelParams{Vasicek{0.02, 0.2}}},
      {Spec::hier_davis_lo, HierParams{-2.2, 0.3, DavisLo{0.0, 0.01}}},
      {Spec::hier_torri, HierParams{-2.2, 0.3, Torri{0.0, 0.7, 0.1}}}};
  for (const auto& [s, fp] : cases)
    CHECK(nll(s, fp, from_counts(nl)) == doctest::Approx(nll(s, fp, from_counts(shuffled))).epsilon(1e-13));
}

TEST_CASE("domain handling") {
  const Panel p = from_counts({{100, 2}});
  CHECK(nll(Spec::davis_lo, ModelParams{DavisLo{1.5, 0.1}}, p) == kInf);
  CHECK(nll(Spec::vasicek, ModelParams{Vasicek{0.1, 1.0}}, p) == kInf);
  CHECK(nll(Spec::hier_davis_lo, HierParams{0.0, -1.0, DavisLo{}}, p) == kInf);
  // Impossible observation: no defaults can happen at p = 0.
  CHECK(nll(Spec::davis_lo, ModelParams{DavisLo{0.0, 0.1}}, p) == kInf);
  CHECK_THROWS_AS(nll(Spec::torri, ModelParams{DavisLo{0.1, 0.1}}, p), DomainError);
  CHECK_THROWS_AS(nll(Spec::hier_torri, HierParams{0.0, 0.1, DavisLo{}}, p), DomainError);
  CHECK_THROWS_AS(nll(Spec::davis_lo, ModelParams{DavisLo{0.1, 0.1}}, Panel{}), DomainError);
  CHECK_THROWS_AS(fit(Spec::davis_lo, Panel{}), DomainError);
}

TEST_CASE("hierarchical likelihood is continuous at sigma = 0") {
  const Panel p = from_counts({{100, 2}, {180, 6}, {100, 0}, {250, 9}});
  const double mu = std_normal_quantile(0.02);
  const double base = nll(Spec::davis_lo, ModelParams{DavisLo{0.02, 0.01}}, p);
  CHECK(std::abs(nll(Spec::hier_davis_lo, HierParams{mu, 1e-8, DavisLo{0.0, 0.01}}, p) - base) < 1e-6);
  CHECK(std::abs(nll(Spec::hier_davis_lo, HierParams{mu, 0.0, DavisLo{0.0, 0.01}}, p) - base) < 1e-10);
  const double tb = nll(Spec::torri, ModelParams{Torri{0.02, 0.7, 0.1}}, p);
  CHECK(std::abs(nll(Spec::hier_torri, HierParams{mu, 1e-8, Torri{0.0, 0.7, 0.1}}, p) - tb) < 1e-6);
}

TEST_CASE("fit quadrature is close to the default rule") {
  const Panel p = simulate_hier_panel({-2.0, 0.4, DavisLo{0.0, 0.01}}, alternating(60), {3, 0});
  const FitParams fp = HierParams{-2.0, 0.4, DavisLo{0.0, 0.01}};
  CHECK(std::abs(nll(Spec::hier_davis_lo, fp, p, FitOptions{}.quad) - nll(Spec::hier_davis_lo, fp, p)) < 1e-7);
}

TEST_CASE("likelihood at the truth dominates perturbed parameters") {
  const Vasicek truth{0.03, 0.15};
  const Panel p = simulate_panel(truth, std::vector<int>(400, 150), {11, 0});
  const double at_truth = nll(Spec::vasicek, ModelParams{truth}, p);
  std::mt19937_64 gen(5);
  // Each coordinate moves by 30% to 60% on the log scale, several standard
  // errors at this panel length.
  std::uniform_real_distribution<double> U(0.3, 0.6);
  auto jump = [&] { return (gen() & 1 ? 1.0 : -1.0) * U(gen); };
  for (int i = 0; i < 20; ++i) {
    const Vasicek alt{truth.p * std::exp(jump()), truth.rho_a * std::exp(jump())};
    CHECK(at_truth <= nll(Spec::vasicek, ModelParams{alt}, p));
  }
}

TEST_CASE("independent panel fits contagion and correlation near zero") {
  const Panel p = simulate_panel(DavisLo{0.02, 0.0}, std::vector<int>(300, 200), {21, 0});
  const FitResult d = fit(Spec::davis_lo, p);
  const FitResult v = fit(Spec::vasicek, p);
  const DavisLo dl = std::get<DavisLo>(std::get<ModelParams>(d.params));
  const Vasicek va = std::get<Vasicek>(std::get<ModelParams>(v.params));
  CHECK(dl.q < 2e-3);
  CHECK(va.rho_a < 0.03);
  CHECK(std::abs(dl.p - 0.02) < 3e-3);
  CHECK(d.boundary == (dl.q == 0.0));
  CHECK(v.boundary == (va.rho_a == 0.0));
  CHECK(d.aic == doctest::Approx(2.0 * d.nll + 4.0).epsilon(1e-14));
}

TEST_CASE("underdispersed panel lands on the boundary") {
  // Identical counts every year: no extra-binomial variation at all.
  std::vector<std::pair<int, int>> nl(40, {200, 4});
  const Panel p = from_counts(nl);
  const FitResult d = fit(Spec::davis_lo, p);
  CHECK(d.boundary);
  CHECK(std::get<DavisLo>(std::get<ModelParams>(d.params)).q == 0.0);
  const FitResult v = fit(Spec::vasicek, p);
  CHECK(v.boundary);
  CHECK(std::get<Vasicek>(std::get<ModelParams>(v.params)).rho_a == 0.0);
  // Both collapse to the same binomial, so the tie goes to the smaller tag.
  const std::vector<FitResult> fits{v, d};
  CHECK(aic_select(fits).winner == Spec::davis_lo);
}

TEST_CASE("fit is deterministic and never worse than its seeds") {
  const Panel p = simulate_panel(Torri{0.01, 0.8, 0.2}, std::vector<int>(100, 200), {8, 1});
  const FitResult a = fit(Spec::torri, p), b = fit(Spec::torri, p);
  CHECK(a.nll == b.nll);
  const Torri ta = std::get<Torri>(std::get<ModelParams>(a.params));
  const Torri tb = std::get<Torri>(std::get<ModelParams>(b.params));
  CHECK((ta.p == tb.p && ta.u == tb.u && ta.v == tb.v));
  CHECK(a.nll <= nll(Spec::torri, ModelParams{Torri{0.01, 0.8, 0.2}}, p) + 1e-9);
  CHECK(a.converged);
}

TEST_CASE("hierarchical round trip on one panel") {
  const HierParams truth{std_normal_quantile(0.02), 0.3, DavisLo{0.0, 0.01}};
  const Panel p = simulate_hier_panel(truth, alternating(200), {99, 0});
  const FitResult f = fit(Spec::hier_davis_lo, p);
  const HierParams hp = std::get<HierParams>(f.params);
  CHECK(std::abs(hp.mu / truth.mu - 1.0) < 0.1);
  CHECK(std::abs(hp.sigma / truth.sigma - 1.0) < 0.4);
  CHECK(f.nll <= nll(Spec::hier_davis_lo, truth, p) + 1e-9);
  CHECK(f.aic == doctest::Approx(2.0 * f.nll + 6.0).epsilon(1e-14));
}

TEST_CASE("aic selection") {
  FitResult a;
  a.spec = Spec::vasicek;
  a.nll = 10.0;
  a.aic = 24.0;
  const std::vector<FitResult> one{a};
  CHECK(aic_select(one).winner == Spec::vasicek);
  FitResult b = a;
  b.spec = Spec::torri;
  b.aic = 26.0;
  const std::vector<FitResult> two{b, a};
  const AicSelection sel = aic_select(two);
  CHECK(sel.winner == Spec::vasicek);
  REQUIRE(sel.table.size() == 2);
  CHECK(sel.table[0].first == Spec::torri);
  FitResult c = a;
  c.spec = Spec::hier_davis_lo;
  c.aic = 24.0;
  const std::vector<FitResult> tie{c, a};
  CHECK(aic_select(tie).winner == Spec::vasicek);
  FitResult d = a;
  d.spec = Spec::davis_lo;
  d.aic = 24.0 + 1e-12;
  const std::vector<FitResult> tie2{a, d};
  CHECK(aic_select(tie2).winner == Spec::davis_lo);
  CHECK_THROWS_AS(aic_select(std::vector<FitResult>{}), DomainError);
}

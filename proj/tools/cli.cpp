#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "defaultlab/calibration.hpp"
#include "defaultlab/dataio.hpp"
#include "defaultlab/divergence.hpp"
#include "defaultlab/risk.hpp"
#include "defaultlab/simulate.hpp"

namespace defaultlab::cli {

using json = nlohmann::ordered_json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

// Non-finite values go out as strings so the document stays valid JSON.
json num(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

double parse_double(const std::string& key, const std::string& text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw UsageError("bad number for " + key + ": '" + text + "'");
  return x;
}

ModelParams preset(const std::string& name) {
  if (name == "torri-high") return calibrate_torri_at_p(kReferenceTarget, kTorriHighP).params();
  if (name == "torri-mid") return calibrate_torri_at_p(kReferenceTarget, kTorriMidP).params();
  if (name == "torri-low") return calibrate_torri_at_p(kReferenceTarget, kTorriLowP).params();
  if (name == "davislo-ref") return calibrate_davis_lo(kReferenceTarget);
  if (name == "vasicek-ref") return calibrate_vasicek(kReferenceTarget);
  throw UsageError("unknown model '" + name + "'");
}

// Reads key=value pairs and checks they are exactly the expected keys.
std::map<std::string, double> parse_fields(const std::string& body,
                                           const std::vector<std::vector<std::string>>& keys) {
  std::map<std::string, double> fields;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("expected key=value, got '" + item + "'");
    std::string key = item.substr(0, eq);
    bool known = false;
    for (const auto& aliases : keys) {
      if (std::find(aliases.begin(), aliases.end(), key) != aliases.end()) {
        key = aliases.front();
        known = true;
      }
    }
    if (!known) throw UsageError("unexpected key '" + key + "'");
    if (fields.count(key)) throw UsageError("duplicate key '" + key + "'");
    fields[key] = parse_double(key, item.substr(eq + 1));
  }
  for (const auto& aliases : keys)
    if (!fields.count(aliases.front())) throw UsageError("missing key '" + aliases.front() + "'");
  return fields;
}

ModelParams structural_of(const FitParams& fp) {
  if (const auto* mp = std::get_if<ModelParams>(&fp)) return *mp;
  return std::get<HierParams>(fp).structural;
}

Spec spec_of_fit(const FitParams& fp) {
  if (const auto* mp = std::get_if<ModelParams>(&fp)) return spec_of(*mp);
  const HierParams& hp = std::get<HierParams>(fp);
  return std::holds_alternative<DavisLo>(hp.structural) ? Spec::hier_davis_lo : Spec::hier_torri;
}

json params_json(const FitParams& fp) {
  json j;
  j["spec"] = to_string(spec_of_fit(fp));
  if (const auto* mp = std::get_if<ModelParams>(&fp)) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          j["p"] = m.p;
          if constexpr (std::is_same_v<T, DavisLo>) {
            j["q"] = m.q;
          } else if constexpr (std::is_same_v<T, Torri>) {
            j["u"] = m.u;
            j["v"] = m.v;
          } else {
            j["rho_a"] = m.rho_a;
          }
        },
        *mp);
  } else {
    const HierParams& hp = std::get<HierParams>(fp);
    j["mu"] = hp.mu;
    j["sigma"] = hp.sigma;
    if (const auto* d = std::get_if<DavisLo>(&hp.structural)) {
      j["q"] = d->q;
    } else {
      const Torri& t = std::get<Torri>(hp.structural);
      j["u"] = t.u;
      j["v"] = t.v;
    }
  }
  j["model_spec"] = format_model_spec(fp);
  return j;
}

CountDistribution law_of(const FitParams& fp, int n) {
  if (const auto* mp = std::get_if<ModelParams>(&fp)) return model_pmf(*mp, n);
  return hier_pmf(std::get<HierParams>(fp), n);
}

std::vector<double> read_grid(const std::vector<double>& given, std::vector<double> fallback) {
  return given.empty() ? fallback : given;
}

struct DataArgs {
  std::string path;
  std::string class_label = "ALL";
  std::optional<int> from;
  std::optional<int> to;

  void add(CLI::App* sub) {
    sub->add_option("--data", path, "CSV with header year,n,defaults,class")->required();
    sub->add_option("--class", class_label, "Rating class to keep");
    sub->add_option("--from", from, "First year (inclusive)");
    sub->add_option("--to", to, "Last year (inclusive)");
  }

  Panel load() const {
    std::optional<YearRange> range;
    if (from || to) range = YearRange{from.value_or(INT_MIN), to.value_or(INT_MAX)};
    return load_panel(path, class_label, range);
  }

  json describe(const Panel& panel) const {
    json j;
    j["path"] = path;
    j["class"] = class_label;
    j["years"] = panel.size();
    j["first_year"] = panel.records().front().year;
    j["last_year"] = panel.records().back().year;
    j["n_bar"] = panel.n_bar();
    return j;
  }
};

json fit_json(const FitResult& f) {
  json j;
  j["spec"] = to_string(f.spec);
  j["params"] = params_json(f.params);
  j["nll"] = num(f.nll);
  j["aic"] = num(f.aic);
  j["converged"] = f.converged;
  j["boundary"] = f.boundary;
  return j;
}

std::vector<Spec> parse_specs(const std::vector<std::string>& tags) {
  std::vector<Spec> specs;
  for (const std::string& t : tags) {
    if (t == "all") {
      for (Spec s : {Spec::davis_lo, Spec::torri, Spec::vasicek, Spec::hier_davis_lo, Spec::hier_torri})
        specs.push_back(s);
      continue;
    }
    try {
      specs.push_back(spec_from_string(t));
    } catch (const DomainError&) {
      throw UsageError("unknown spec '" + t + "'");
    }
  }
  return specs;
}

Family parse_family(const std::string& name) {
  try {
    return family_from_string(name);
  } catch (const DomainError&) {
    throw UsageError("unknown family '" + name + "'");
  }
}

// Result of a subcommand: text for stdout and whether the numerics settled.
struct Output {
  std::string text;
  bool converged = true;
};

Output as_json(const json& j, bool converged = true) { return {j.dump(2) + "\n", converged}; }

}  // namespace

FitParams parse_model_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return preset(text);
  const std::string tag = text.substr(0, colon);
  const std::string body = text.substr(colon + 1);
  FitParams out;
  if (tag == "davislo" || tag == "davis_lo") {
    const auto f = parse_fields(body, {{"p"}, {"q"}});
    out = ModelParams{DavisLo{f.at("p"), f.at("q")}};
  } else if (tag == "torri") {
    const auto f = parse_fields(body, {{"p"}, {"u"}, {"v"}});
    out = ModelParams{Torri{f.at("p"), f.at("u"), f.at("v")}};
  } else if (tag == "vasicek") {
    const auto f = parse_fields(body, {{"p"}, {"rho", "rho_a"}});
    out = ModelParams{Vasicek{f.at("p"), f.at("rho")}};
  } else if (tag == "hier-davislo" || tag == "hier_davis_lo") {
    const auto f = parse_fields(body, {{"mu"}, {"sigma"}, {"q"}});
    out = HierParams{f.at("mu"), f.at("sigma"), DavisLo{0.0, f.at("q")}};
  } else if (tag == "hier-torri" || tag == "hier_torri") {
    const auto f = parse_fields(body, {{"mu"}, {"sigma"}, {"u"}, {"v"}});
    out = HierParams{f.at("mu"), f.at("sigma"), Torri{0.0, f.at("u"), f.at("v")}};
  } else {
    throw UsageError("unknown model tag '" + tag + "'");
  }
  if (const auto* mp = std::get_if<ModelParams>(&out)) {
    validate(*mp);
  } else {
    validate(std::get<HierParams>(out));
  }
  return out;
}

std::string format_model_spec(const FitParams& fp) {
  const auto kv = [](const char* k, double x) { return std::string(k) + "=" + format_number(x); };
  if (const auto* mp = std::get_if<ModelParams>(&fp)) {
    if (const auto* d = std::get_if<DavisLo>(mp)) return "davislo:" + kv("p", d->p) + "," + kv("q", d->q);
    if (const auto* t = std::get_if<Torri>(mp))
      return "torri:" + kv("p", t->p) + "," + kv("u", t->u) + "," + kv("v", t->v);
    const Vasicek& v = std::get<Vasicek>(*mp);
    return "vasicek:" + kv("p", v.p) + "," + kv("rho", v.rho_a);
  }
  const HierParams& hp = std::get<HierParams>(fp);
  const std::string head = kv("mu", hp.mu) + "," + kv("sigma", hp.sigma);
  if (const auto* d = std::get_if<DavisLo>(&hp.structural)) return "hier-davislo:" + head + "," + kv("q", d->q);
  const Torri& t = std::get<Torri>(hp.structural);
  return "hier-torri:" + head + "," + kv("u", t.u) + "," + kv("v", t.v);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Correlated default-count models: calibration, laws, risk, KL projection, fitting"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_path;
  app.add_option("--out", out_path, "Write the result to this file instead of stdout");

  std::function<Output()> action;
  const auto bind = [&](CLI::App* sub, std::function<Output()> fn) {
    sub->callback([&action, fn] { action = fn; });
  };

  // calibrate
  std::string cal_model;
  int cal_n = kReferenceTarget.n;
  double cal_m = kReferenceTarget.m, cal_rho = kReferenceTarget.rho;
  std::optional<double> cal_p;
  double cal_tol = kDefaultCalibrationTol;
  {
    auto* sub = app.add_subcommand("calibrate", "Match a mean default rate and default correlation");
    sub->add_option("--model", cal_model, "davislo, torri or vasicek")->required();
    sub->add_option("--n", cal_n, "Pool size")->check(CLI::PositiveNumber);
    sub->add_option("--m", cal_m, "Mean default rate");
    sub->add_option("--rho", cal_rho, "Pairwise default correlation");
    sub->add_option("--p", cal_p, "Idiosyncratic probability selecting the Torri branch");
    sub->add_option("--tol", cal_tol, "Bisection tolerance");
    bind(sub, [&]() -> Output {
      const CalibrationTarget target{cal_n, cal_m, cal_rho};
      const Family family = parse_family(cal_model);
      json j;
      j["model"] = to_string(family);
      j["target"] = {{"n", cal_n}, {"m", cal_m}, {"rho", cal_rho}};
      ModelParams params;
      std::optional<double> pi_n;
      if (family == Family::torri) {
        if (!cal_p) throw UsageError("calibrate --model torri needs --p");
        const TorriBranch b = calibrate_torri_at_p(target, *cal_p, cal_tol);
        params = b.params();
        pi_n = b.pi_n;
      } else if (family == Family::davis_lo) {
        if (cal_p) throw UsageError("--p applies to torri only");
        params = calibrate_davis_lo(target, cal_tol);
      } else {
        if (cal_p) throw UsageError("--p applies to torri only");
        params = calibrate_vasicek(target, cal_tol);
      }
      j["params"] = params_json(params);
      if (pi_n) j["pi_n"] = *pi_n;
      const MomentSummary s = model_moments(params, cal_n);
      j["achieved"] = {{"m", s.m}, {"rho", s.rho}};
      j["model_spec"] = format_model_spec(params);
      return as_json(j);
    });
  }

  // pmf and survival
  std::string law_model;
  int law_n = 200;
  for (const char* name : {"pmf", "survival"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "pmf" ? "Count law as CSV h,P,S"
                                                                    : "Survival function as CSV h,S,F");
    sub->add_option("--model", law_model, "Model string or preset")->required();
    sub->add_option("--n", law_n, "Pool size")->check(CLI::PositiveNumber);
    const bool is_pmf = std::string(name) == "pmf";
    bind(sub, [&, is_pmf]() -> Output {
      const CountDistribution d = law_of(parse_model_spec(law_model), law_n);
      const std::vector<double> s = survival(d);
      const std::vector<double> f = cdf(d);
      std::string text = is_pmf ? "h,P,S\n" : "h,S,F\n";
      for (int h = 0; h <= d.n(); ++h) {
        text += std::to_string(h) + ",";
        text += is_pmf ? format_number(d.pmf(h)) + "," + format_number(s[h])
                       : format_number(s[h]) + "," + format_number(f[h]);
        text += "\n";
      }
      return {text, true};
    });
  }

  // risk
  std::vector<std::string> risk_models, risk_files;
  std::optional<int> risk_n;
  std::vector<double> risk_alpha;
  {
    auto* sub = app.add_subcommand("risk", "VaR and expected shortfall as a JSON list");
    sub->add_option("--model", risk_models, "Model string or preset (repeatable)");
    sub->add_option("--from-json", risk_files, "Output of calibrate or kl ('-' for stdin)");
    sub->add_option("--n", risk_n, "Pool size (default: from the JSON target, else 200)");
    sub->add_option("--alpha", risk_alpha, "Confidence levels (default 0.99)")->delimiter(',');
    bind(sub, [&]() -> Output {
      std::vector<std::pair<std::string, int>> jobs;
      for (const std::string& m : risk_models) jobs.emplace_back(m, risk_n.value_or(200));
      for (const std::string& path : risk_files) {
        json j;
        try {
          if (path == "-") {
            j = json::parse(std::cin);
          } else {
            std::ifstream in(path);
            if (!in) throw DataError("cannot open " + path);
            j = json::parse(in);
          }
        } catch (const json::exception& e) {
          throw DataError(path + ": " + e.what());
        }
        const json* spec = j.contains("model_spec") ? &j["model_spec"]
                           : (j.contains("params") && j["params"].contains("model_spec"))
                               ? &j["params"]["model_spec"]
                               : nullptr;
        if (!spec || !spec->is_string()) throw DataError(path + ": no model_spec field");
        int n = 200;
        if (j.contains("target") && j["target"].contains("n")) n = j["target"]["n"].get<int>();
        jobs.emplace_back(spec->get<std::string>(), risk_n.value_or(n));
      }
      if (jobs.empty()) throw UsageError("risk needs --model or --from-json");
      const std::vector<double> alphas = read_grid(risk_alpha, {0.99});
      json list = json::array();
      for (const auto& [spec_text, n] : jobs) {
        const FitParams fp = parse_model_spec(spec_text);
        const CountDistribution d = law_of(fp, n);
        for (double a : alphas) {
          const RiskReport r = risk_report(d, a);
          list.push_back({{"model_spec", format_model_spec(fp)}, {"n", n}, {"alpha", a}, {"var", r.var},
                          {"es", r.es}});
        }
      }
      return as_json(list);
    });
  }

  // kl
  std::string kl_target, kl_family;
  int kl_n = 200;
  ProjectionOptions kl_opts;
  {
    auto* sub = app.add_subcommand("kl", "Project a law onto a family by minimum KL divergence");
    sub->add_option("--target", kl_target, "Model string or preset")->required();
    sub->add_option("--family", kl_family, "davislo, torri or vasicek")->required();
    sub->add_option("--n", kl_n, "Pool size")->check(CLI::PositiveNumber);
    sub->add_option("--floor", kl_opts.probability_floor, "Candidate probability floor (0 for none)");
    bind(sub, [&]() -> Output {
      const FitParams target = parse_model_spec(kl_target);
      const ProjectionResult r = kl_project(law_of(target, kl_n), parse_family(kl_family), kl_opts);
      json j;
      j["target"] = params_json(target);
      j["n"] = kl_n;
      j["family"] = to_string(r.family);
      j["kl"] = num(r.kl);
      j["kl_exact"] = num(r.kl_exact);
      j["params"] = params_json(r.params);
      j["converged"] = r.converged;
      j["boundary"] = r.boundary;
      j["floor"] = kl_opts.probability_floor;
      return as_json(j, r.converged);
    });
  }

  // kl-curve
  std::string curve_structural;
  int curve_n = 200;
  double curve_m = kReferenceTarget.m;
  std::vector<double> curve_r;
  {
    auto* sub = app.add_subcommand("kl-curve", "KL to the Vasicek family along the variance ratio r");
    sub->add_option("--structural", curve_structural, "Contagion model string or preset; p is ignored")
        ->required();
    sub->add_option("--n", curve_n, "Pool size")->check(CLI::PositiveNumber);
    sub->add_option("--m", curve_m, "Mean default rate held fixed along the curve");
    sub->add_option("--r-grid", curve_r, "Variance ratios (default 0,0.2,0.4,0.6,0.8)")->delimiter(',');
    bind(sub, [&]() -> Output {
      const ModelParams structural = structural_of(parse_model_spec(curve_structural));
      const std::vector<double> grid = read_grid(curve_r, {0.0, 0.2, 0.4, 0.6, 0.8});
      const auto points = kl_curve_vs_r(structural, curve_n, grid, curve_m);
      std::string text = "r,reachable,mu,sigma,kl,kl_exact,p,rho_a,boundary\n";
      bool converged = true;
      for (const KlCurvePoint& pt : points) {
        text += format_number(pt.r) + "," + (pt.reachable ? "1" : "0") + ",";
        if (pt.reachable && pt.projection) {
          const ProjectionResult& pr = *pt.projection;
          const Vasicek& v = std::get<Vasicek>(pr.params);
          converged = converged && pr.converged;
          text += format_number(pt.mu) + "," + format_number(pt.sigma) + "," + format_number(pr.kl) + "," +
                  format_number(pr.kl_exact) + "," + format_number(v.p) + "," + format_number(v.rho_a) + "," +
                  (pr.boundary ? "1" : "0");
        } else {
          text += ",,,,,,";
        }
        text += "\n";
      }
      return {text, converged};
    });
  }

  // fit
  std::vector<std::string> fit_specs;
  DataArgs fit_data;
  {
    auto* sub = app.add_subcommand("fit", "Maximum likelihood fits and AIC selection on a panel");
    sub->add_option("--spec", fit_specs, "Specifications or 'all' (default all)")->delimiter(',');
    fit_data.add(sub);
    bind(sub, [&]() -> Output {
      const Panel panel = fit_data.load();
      const std::vector<Spec> specs = parse_specs(fit_specs.empty() ? std::vector<std::string>{"all"} : fit_specs);
      std::vector<FitResult> fits;
      json j;
      j["data"] = fit_data.describe(panel);
      j["fits"] = json::array();
      bool converged = true;
      for (Spec s : specs) {
        fits.push_back(fit(s, panel));
        converged = converged && fits.back().converged;
        j["fits"].push_back(fit_json(fits.back()));
      }
      const AicSelection sel = aic_select(fits);
      json table = json::array();
      for (const auto& [s, aic] : sel.table) table.push_back({{"spec", to_string(s)}, {"aic", num(aic)}});
      j["selection"] = {{"winner", to_string(sel.winner)}, {"table", table}};
      return as_json(j, converged);
    });
  }

  // var-decomp
  std::string vd_spec = "hier-davislo";
  DataArgs vd_data;
  {
    auto* sub = app.add_subcommand("var-decomp", "Variance decomposition of a fitted specification");
    sub->add_option("--spec", vd_spec, "Specification to fit (hierarchical or i.i.d.)");
    vd_data.add(sub);
    bind(sub, [&]() -> Output {
      const Panel panel = vd_data.load();
      const Spec spec = parse_specs({vd_spec}).front();
      const SummaryStats st = summary_stats(panel);
      if (st.variance_undefined) throw DataError("variance decomposition needs at least two years");
      const int n_bar = static_cast<int>(std::lround(panel.n_bar()));
      const FitResult f = fit(spec, panel);
      json j;
      j["data"] = vd_data.describe(panel);
      j["fit"] = fit_json(f);
      j["n_bar_rounded"] = n_bar;
      j["empirical_variance"] = st.scaled_variance;
      if (is_hierarchical(spec)) {
        const HierParams& hp = std::get<HierParams>(f.params);
        const DecompositionReport d = variance_decomposition(hp, n_bar, st.scaled_variance);
        j["r_iid"] = d.r_iid;
        j["r_infect"] = d.r_infect;
        j["r_pt"] = d.r_pt;
        j["normalizer"] = d.normalizer;
        j["variance_ratio"] = variance_ratio(hp, n_bar);
      } else {
        const ModelParams& mp = std::get<ModelParams>(f.params);
        j["iid_dependence_ratio"] = iid_dependence_ratio(model_moments(mp, n_bar), n_bar, st.scaled_variance);
      }
      return as_json(j, f.converged);
    });
  }

  // manifold
  int man_n = kReferenceTarget.n;
  double man_m = kReferenceTarget.m, man_rho = kReferenceTarget.rho, man_alpha = 0.99;
  std::vector<double> man_grid;
  int man_points = 25;
  {
    auto* sub = app.add_subcommand("manifold", "Torri iso-(m, rho) curve with tail risk as CSV");
    sub->add_option("--n", man_n, "Pool size")->check(CLI::PositiveNumber);
    sub->add_option("--m", man_m, "Mean default rate");
    sub->add_option("--rho", man_rho, "Default correlation");
    sub->add_option("--p-grid", man_grid, "Idiosyncratic probabilities (default: even grid over the feasible range)")
        ->delimiter(',');
    sub->add_option("--points", man_points, "Size of the default grid")->check(CLI::Range(2, 100000));
    sub->add_option("--alpha", man_alpha, "Confidence level for VaR and ES");
    bind(sub, [&]() -> Output {
      const CalibrationTarget target{man_n, man_m, man_rho};
      std::vector<double> grid = man_grid;
      if (grid.empty()) {
        const PRange range = torri_feasible_p_range(target);
        for (int i = 0; i < man_points; ++i) grid.push_back(range.lo + (range.hi - range.lo) * i / (man_points - 1));
      }
      std::string text = "p,u,v,pi_n,var,es,status\n";
      for (const ManifoldPoint& pt : trace_torri_manifold(target, grid)) {
        text += format_number(pt.p) + ",";
        if (pt.branch) {
          const RiskReport r = risk_report(torri_pmf(pt.branch->params(), man_n), man_alpha);
          text += format_number(pt.branch->u) + "," + format_number(pt.branch->v) + "," +
                  format_number(pt.branch->pi_n) + "," + std::to_string(r.var) + "," + format_number(r.es) + ",ok";
        } else {
          std::string reason = pt.reason;
          std::replace(reason.begin(), reason.end(), ',', ';');
          text += ",,,,," + (reason.empty() ? std::string("infeasible") : reason);
        }
        text += "\n";
      }
      return {text, true};
    });
  }

  // identify
  int id_T = 100, id_R = 200, id_n = 200;
  std::uint64_t id_seed = 20240611;
  std::string id_format = "json";
  std::vector<std::string> id_targets;
  {
    auto* sub = app.add_subcommand("identify", "AIC confusion matrix over simulated panels");
    sub->add_option("--T", id_T, "Years per panel")->check(CLI::PositiveNumber);
    sub->add_option("--R", id_R, "Replications per target")->check(CLI::PositiveNumber);
    sub->add_option("--n", id_n, "Pool size")->check(CLI::PositiveNumber);
    sub->add_option("--seed", id_seed, "Master seed");
    sub->add_option("--target", id_targets,
                    "Target models (default torri-high torri-mid torri-low davislo-ref)");
    sub->add_option("--format", id_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    bind(sub, [&]() -> Output {
      const std::vector<std::string> names =
          id_targets.empty() ? std::vector<std::string>{"torri-high", "torri-mid", "torri-low", "davislo-ref"}
                             : id_targets;
      std::vector<NamedTarget> targets;
      for (const std::string& name : names) {
        const FitParams fp = parse_model_spec(name);
        if (!std::holds_alternative<ModelParams>(fp)) throw UsageError("identify targets must be one-period models");
        targets.push_back({name, std::get<ModelParams>(fp)});
      }
      const ConfusionMatrix cm = identifiability_experiment(targets, id_n, id_T, id_R, id_seed);
      if (id_format == "csv") {
        std::string text = "target";
        for (const std::string& c : cm.cols) text += "," + c;
        text += ",failures,nonconverged\n";
        for (std::size_t i = 0; i < cm.rows.size(); ++i) {
          text += cm.rows[i];
          for (double r : cm.rates[i]) text += "," + format_number(r);
          text += "," + std::to_string(cm.failures[i]) + "," + std::to_string(cm.nonconverged[i]) + "\n";
        }
        return {text, true};
      }
      json j;
      j["n"] = cm.pool_size;
      j["T"] = cm.sample_size;
      j["R"] = cm.replications;
      j["seed"] = id_seed;
      j["rows"] = cm.rows;
      j["cols"] = cm.cols;
      j["counts"] = cm.counts;
      j["rates"] = cm.rates;
      j["failures"] = cm.failures;
      j["nonconverged"] = cm.nonconverged;
      return as_json(j);
    });
  }

  // simulate
  std::string sim_spec;
  int sim_years = 100, sim_n = 200, sim_first = 1;
  std::vector<int> sim_pools;
  std::uint64_t sim_seed = 1, sim_stream = 0;
  std::string sim_class = "SIM";
  {
    auto* sub = app.add_subcommand("simulate", "Synthetic panel as CSV year,n,defaults,class");
    sub->add_option("--spec", sim_spec, "Model string or preset")->required();
    sub->add_option("--years", sim_years, "Number of years")->check(CLI::PositiveNumber);
    sub->add_option("--n", sim_n, "Pool size for every year")->check(CLI::PositiveNumber);
    sub->add_option("--pools", sim_pools, "Pool sizes, cycled over the years")->delimiter(',');
    sub->add_option("--seed", sim_seed, "Seed");
    sub->add_option("--stream", sim_stream, "Stream");
    sub->add_option("--first-year", sim_first, "Label of the first year");
    sub->add_option("--class", sim_class, "Class label");
    bind(sub, [&]() -> Output {
      const FitParams fp = parse_model_spec(sim_spec);
      std::vector<int> pools(sim_years);
      for (int t = 0; t < sim_years; ++t) pools[t] = sim_pools.empty() ? sim_n : sim_pools[t % sim_pools.size()];
      for (int n : pools)
        if (n < 1) throw UsageError("pool sizes must be positive");
      const RngSpec rs{sim_seed, sim_stream};
      const Panel panel = std::holds_alternative<ModelParams>(fp)
                              ? simulate_panel(std::get<ModelParams>(fp), pools, rs, sim_first, sim_class)
                              : simulate_hier_panel(std::get<HierParams>(fp), pools, rs, sim_first, sim_class);
      std::ostringstream os;
      write_panel(os, panel);
      return {os.str(), true};
    });
  }

  // summary
  DataArgs sum_data;
  {
    auto* sub = app.add_subcommand("summary", "Summary statistics of a panel");
    sum_data.add(sub);
    bind(sub, [&]() -> Output {
      const Panel panel = sum_data.load();
      const SummaryStats st = summary_stats(panel);
      const MomentSummary em = empirical_moments(panel);
      json j;
      j["data"] = sum_data.describe(panel);
      j["mean_n"] = st.mean_n;
      j["mean_L"] = st.mean_L;
      j["mean_rate"] = st.mean_rate;
      j["total_rate"] = st.total_rate;
      j["scaled_variance"] = st.scaled_variance;
      j["variance_undefined"] = st.variance_undefined;
      j["empirical_moments"] = {{"m", em.m}, {"p11", em.p11}, {"rho", em.rho}, {"degenerate", em.degenerate}};
      return as_json(j);
    });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const Output result = action();
    if (out_path.empty()) {
      out << result.text;
    } else {
      std::ofstream file(out_path, std::ios::binary);
      if (!file) throw DataError("cannot write " + out_path);
      file << result.text;
    }
    if (!result.converged) {
      err << "warning: optimizer did not converge\n";
      return kNumerical;
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace defaultlab::cli

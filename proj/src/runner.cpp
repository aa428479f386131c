#include "gglab/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "gglab/cascade.hpp"
#include "gglab/identity_tests.hpp"
#include "gglab/invariance.hpp"
#include "gglab/spin_model.hpp"
#include "gglab/ultrametric.hpp"

namespace gglab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json row_json(const SummaryRow& r) {
  return {{"suite", r.suite},           {"kind", r.kind},     {"test", r.test},
          {"n", r.n},                   {"lhs", json_number(r.lhs)},
          {"lhs_se", json_number(r.lhs_se)}, {"rhs", json_number(r.rhs)},
          {"rhs_se", json_number(r.rhs_se)}, {"difference", json_number(r.difference)},
          {"se", json_number(r.se)},    {"z", json_number(r.z)}, {"verdict", r.verdict}};
}

SummaryRow row_from_json(const json& j) {
  SummaryRow r;
  r.suite = j.at("suite").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.test = j.at("test").get<std::string>();
  r.n = j.at("n").get<std::size_t>();
  r.lhs = number_from_json(j.at("lhs"));
  r.lhs_se = number_from_json(j.at("lhs_se"));
  r.rhs = number_from_json(j.at("rhs"));
  r.rhs_se = number_from_json(j.at("rhs_se"));
  r.difference = number_from_json(j.at("difference"));
  r.se = number_from_json(j.at("se"));
  r.z = number_from_json(j.at("z"));
  r.verdict = j.at("verdict").get<std::string>();
  return r;
}

SummaryRow row_from_report(const std::string& suite, const std::string& kind, const std::string& test,
                           std::size_t n, const TestReport& t) {
  return {suite, kind, test, n, t.lhs.mean, t.lhs.std_error, t.rhs.mean, t.rhs.std_error,
          t.difference.mean, t.difference.std_error, t.z_score, t.verdict()};
}

// Suite verdict from its rows: any fail fails; otherwise pass if something
// passed, else the first remaining verdict.
std::string combine(const std::vector<SummaryRow>& rows) {
  bool any_pass = false;
  for (const auto& r : rows) {
    if (r.verdict == "fail") return "fail";
    if (r.verdict == "pass") any_pass = true;
  }
  if (any_pass || rows.empty()) return "pass";
  return rows.front().verdict;
}

SuiteOutcome finish(const SuiteConfig& sc, json report, const std::vector<SummaryRow>& rows,
                    json data = json::object()) {
  SuiteOutcome out;
  out.name = sc.name;
  out.kind = sc.kind;
  out.verdict = combine(rows);
  auto jr = json::array();
  for (const auto& r : rows) jr.push_back(row_json(r));
  report["suite"] = sc.name;
  report["kind"] = sc.kind;
  report["source"] = sc.source;
  report["verdict"] = out.verdict;
  report["rows"] = jr;
  report["data"] = std::move(data);
  out.report = std::move(report);
  return out;
}

template <class T>
T parse_as(const ConfigReader& r, const std::string& key) {
  return r.get<T>(key);
}

std::size_t read_n(const ConfigReader& r, std::size_t min) {
  const auto n = r.integer("n");
  if (n < min) r.child("n").fail("n must be >= " + std::to_string(min));
  return static_cast<std::size_t>(n);
}

MuMode read_mu_mode(const ConfigReader& r) {
  const auto m = r.string("mu_mode", "estimated");
  if (m == "estimated") return MuMode::estimated;
  if (m == "exact") return MuMode::exact;
  r.child("mu_mode").fail("mu_mode must be 'estimated' or 'exact'");
}

BoundedFunctionFamily read_family(const ConfigReader& r) {
  auto fam = parse_as<BoundedFunctionFamily>(r, "fs");
  if (fam.size() == 0) r.child("fs").fail("fs must list at least one function");
  return fam;
}

MixedPSpinModel read_model(const ConfigReader& r, const std::string& type) {
  MixedPSpinModel model;
  model.n_spins = r.integer("n_spins");
  if (type == "sk" || (type == "enumerated" && !r.has("terms"))) {
    model.terms = {{2, r.number("beta", 1.0)}};
  } else {
    const auto terms = r.child("terms");
    if (!terms.node().is_array()) terms.fail("terms must be an array of {p, beta}");
    for (std::size_t i = 0; i < terms.node().size(); ++i) {
      const auto t = terms.element(i);
      t.only({"p", "beta"});
      model.terms.push_back({static_cast<int>(t.integer("p")), t.number("beta")});
    }
  }
  if (r.has("perturbation")) {
    const auto pert = r.child("perturbation");
    if (!pert.node().is_array()) pert.fail("perturbation must be an array of {p, magnitude, seed}");
    for (std::size_t i = 0; i < pert.node().size(); ++i) {
      const auto t = pert.element(i);
      t.only({"p", "magnitude", "seed"});
      model.perturbation.push_back(
          {static_cast<int>(t.integer("p")), t.number("magnitude", 0.0), t.integer("seed", i + 1)});
    }
  }
  return model;
}

}  // namespace

std::shared_ptr<MeasureSource> make_source(const ConfigDocument& doc, const SourceConfig& sc) {
  const ConfigReader r(doc, sc.params, sc.pointer);
  try {
    if (sc.type == "dirac") {
      r.only({"type", "q_star"});
      return std::make_shared<DiracSource>(r.number("q_star", 1.0));
    }
    if (sc.type == "cascade") {
      r.only({"type", "zetas", "overlaps", "K", "dimension"});
      CascadeConfig c;
      c.zetas = r.numbers("zetas");
      c.overlaps = r.numbers("overlaps");
      c.truncation = r.integer("K", kDefaultTruncation);
      c.dimension = r.integer("dimension", 0);
      return std::make_shared<CascadeSource>(c);
    }
    r.only({"type", "n_spins", "beta", "terms", "perturbation", "perturbation_box", "mc"});
    SpinSourceConfig c;
    c.model = read_model(r, sc.type);
    c.enumerated = sc.type == "enumerated";
    if (r.has("perturbation_box")) {
      const auto box = r.numbers("perturbation_box");
      if (box.size() != 2) r.child("perturbation_box").fail("perturbation_box must be [lo, hi]");
      c.perturbation_box = std::make_pair(box[0], box[1]);
    }
    if (r.has("mc")) {
      const auto mc = r.child("mc");
      mc.only({"sweeps", "burn_in", "thinning", "ladder"});
      c.mc.sweeps = mc.integer("sweeps", c.mc.sweeps);
      c.mc.burn_in = mc.integer("burn_in", c.mc.burn_in);
      c.mc.thinning = mc.integer("thinning", c.mc.thinning);
      if (mc.has("ladder")) c.mc.ladder = mc.numbers("ladder");
    }
    return std::make_shared<SpinSource>(c);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
}

// ---------------------------------------------------------------------------
// Suites

namespace {

using SourceMap = std::map<std::string, std::shared_ptr<MeasureSource>>;

PreparedSuite prepare_gg(const ExperimentConfig& cfg, const SuiteConfig& sc, const ConfigReader& r,
                         std::shared_ptr<MeasureSource> src, Budget budget) {
  r.only({"name", "kind", "source", "budget", "n", "f", "psi"});
  const std::size_t n = read_n(r, 2);
  const auto f = r.has("f") ? parse_as<OverlapFunction>(r, "f") : OverlapFunction::constant(1.0);
  const auto psi = parse_as<ScalarFunction>(r, "psi");
  if (f.min_replicas() > n) r.child("f").fail("f references replicas beyond n");
  const double z = cfg.defaults.z_threshold;
  return {sc.name, sc.kind, [=](std::uint64_t seed, unsigned jobs) {
            const auto rep = gg_identity_test(*src, f, psi, n, budget, seed, {z, jobs});
            return finish(sc, json(rep), {row_from_report(sc.name, sc.kind, "gg_identity", n, rep)});
          }};
}

PreparedSuite prepare_mixture(const ExperimentConfig& cfg, const SuiteConfig& sc,
                              const ConfigReader& r, std::shared_ptr<MeasureSource> src,
                              Budget budget) {
  r.only({"name", "kind", "source", "budget", "n", "bins"});
  const std::size_t n = read_n(r, 2);
  const std::size_t bins = r.integer("bins", 0);
  if (bins == 0 && !src->is_atomic()) r.fail("exact patterns need an atomic source; set bins > 0");
  const double z = cfg.defaults.z_threshold;
  return {sc.name, sc.kind, [=](std::uint64_t seed, unsigned jobs) {
            const auto rep = mixture_law_check(*src, n, bins, budget, seed, {z, jobs});
            std::vector<SummaryRow> rows;
            for (std::size_t i = 0; i < rep.patterns.size(); ++i) {
              const auto& b = rep.patterns[i];
              if (b.flagged) continue;
              double worst = 0.0;
              for (const auto& c : b.cells)
                if (!(std::abs(c.z_score) <= std::abs(worst))) worst = c.z_score;
              SummaryRow row{sc.name, sc.kind, "pattern_" + std::to_string(i + 1), n, b.tv,
                             b.tv_std_error, 0.0, 0.0, b.tv, b.tv_std_error, worst, ""};
              row.verdict = !rep.asserted ? "report"
                                          : (std::abs(worst) < z ? "pass" : "fail");
              rows.push_back(row);
            }
            return finish(sc, json(rep), rows);
          }};
}

json phi_data(const InvarianceResult& res) {
  auto rows = json::array();
  for (std::size_t i = 0; i < res.t_grid.size(); ++i)
    rows.push_back({res.t_grid[i], res.phi[i].mean, res.phi[i].std_error});
  return rows;
}

PreparedSuite prepare_invariance(const ExperimentConfig& cfg, const SuiteConfig& sc,
                                 const ConfigReader& r, std::shared_ptr<MeasureSource> src,
                                 Budget budget) {
  r.only({"name", "kind", "source", "budget", "phi", "fs", "t_grid", "h", "mu_mode"});
  const auto fam = read_family(r);
  const auto phi = r.has("phi") ? parse_as<OverlapFunction>(r, "phi") : OverlapFunction::constant(1.0);
  if (phi.min_replicas() > fam.size()) r.child("phi").fail("phi references replicas beyond n = size of fs");
  const auto grid = r.numbers("t_grid");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i]))
      r.child("t_grid").element(i).fail("t must be finite and >= 0");
  PhiOptions opt;
  opt.mu_mode = read_mu_mode(r);
  opt.derivative_step = r.number("h", opt.derivative_step);
  if (!(opt.derivative_step > 0.0)) r.child("h").fail("h must be positive");
  const double z = cfg.defaults.z_threshold;
  return {sc.name, sc.kind, [=](std::uint64_t seed, unsigned jobs) {
            const auto res = invariance_test(phi, fam, *src, grid, budget, seed, {z, jobs}, opt);
            std::vector<SummaryRow> rows;
            auto reports = json::array();
            for (std::size_t i = 0; i < res.reports.size(); ++i) {
              rows.push_back(row_from_report(sc.name, sc.kind, "t=" + fmt(grid[i]), fam.size(),
                                             res.reports[i]));
              reports.push_back(res.reports[i]);
            }
            rows.push_back(row_from_report(sc.name, sc.kind, "derivative", fam.size(), res.derivative));
            json rep = {{"t_grid", grid}, {"reports", reports}, {"derivative", res.derivative}};
            return finish(sc, rep, rows, {{"phi", phi_data(res)}});
          }};
}

PreparedSuite prepare_theorem2(const ExperimentConfig& cfg, const SuiteConfig& sc,
                               const ConfigReader& r, std::shared_ptr<MeasureSource> src,
                               Budget budget) {
  r.only({"name", "kind", "source", "budget", "partition", "varphi", "fs", "mu_mode", "inner_mc"});
  const auto fam = read_family(r);
  const auto part = parse_as<PartitionSpec>(r, "partition");
  const auto varphi = parse_as<WeightedOverlapFunction>(r, "varphi");
  PhiOptions opt;
  opt.mu_mode = read_mu_mode(r);
  opt.inner_mc_weights = r.boolean("inner_mc", false);
  const std::size_t n = fam.size();
  if (part.min_replicas() > n) r.child("partition").fail("partition references replicas beyond n");
  if (varphi.base().min_replicas() > n) r.child("varphi").fail("varphi references replicas beyond n");
  for (const auto& wf : varphi.weight_factors())
    if (wf.cell >= part.cells()) r.child("varphi").fail("varphi references a cell the partition lacks");
  if (!src->is_atomic() && !opt.inner_mc_weights)
    r.fail("exact partition weights need an atomic source; set inner_mc = true");
  const double z = cfg.defaults.z_threshold;
  return {sc.name, sc.kind, [=](std::uint64_t seed, unsigned jobs) {
            const auto rep = theorem2_test(*src, part, varphi, fam, n, budget, seed, {z, jobs}, opt);
            return finish(sc, json(rep), {row_from_report(sc.name, sc.kind, "theorem2", n, rep)});
          }};
}

PreparedSuite prepare_ultrametric(const ExperimentConfig& cfg, const SuiteConfig& sc,
                                  const ConfigReader& r, std::shared_ptr<MeasureSource> src,
                                  Budget budget) {
  r.only({"name", "kind", "source", "budget", "epsilon", "tree_replicas", "tree_samples"});
  const double eps = r.number("epsilon", cfg.defaults.epsilon);
  if (!(eps > 0.0)) r.child("epsilon").fail("epsilon must be positive");
  const std::size_t replicas = r.integer("tree_replicas", 8);
  const std::size_t samples = r.integer("tree_samples", 4);
  if (replicas < 3) r.child("tree_replicas").fail("tree_replicas must be >= 3");
  return {sc.name, sc.kind, [=](std::uint64_t seed, unsigned jobs) {
            const auto stat = ultrametricity_stat(*src, budget, seed, {cfg.defaults.z_threshold, jobs});
            std::vector<OverlapMatrix> mats;
            auto trees = json::array();
            double worst_tree = 0.0;
            for (std::size_t s = 0; s < samples; ++s) {
              auto g = src->realize(derive_seed(seed, {7, s}));
              Rng rng = make_rng(derive_seed(seed, {8, s}));
              const auto pts = g->sample(replicas, rng);
              mats.push_back(overlaps_of(*g, pts));
              const auto tree = build_ultrametric_tree(mats.back());
              const double err = cophenetic_error(tree, mats.back());
              worst_tree = std::max(worst_tree, err);
              trees.push_back({{"newick", tree.newick()},
                               {"heights", tree.distinct_heights(eps)},
                               {"cophenetic_error", err}});
            }
            const auto census = triangle_census(std::span<const OverlapMatrix>(mats), eps);
            const bool asserted = src->is_gg_reference();
            auto verdict = [&](bool ok) { return asserted ? (ok ? "pass" : "fail") : "report"; };
            const std::size_t nt = stat.triples;
            std::vector<SummaryRow> rows{
                {sc.name, sc.kind, "ultrametricity", 3, stat.estimate.mean, stat.estimate.std_error,
                 1.0, 0.0, stat.estimate.mean - 1.0, stat.estimate.std_error,
                 z_score(stat.estimate.mean - 1.0, stat.estimate.std_error),
                 verdict(stat.violations == 0)},
                {sc.name, sc.kind, "census_violating", replicas, static_cast<double>(census.violating),
                 0.0, 0.0, 0.0, static_cast<double>(census.violating), 0.0, 0.0,
                 verdict(census.violating == 0)},
                {sc.name, sc.kind, "cophenetic_error", replicas, worst_tree, 0.0, 0.0, 0.0, worst_tree,
                 0.0, 0.0, verdict(worst_tree < 1e-9)}};
            std::ostringstream csv;
            write_overlap_csv(csv, mats);
            json rep = {{"ultrametricity", {{"estimate", stat.estimate},
                                            {"triples", nt},
                                            {"violations", stat.violations}}},
                        {"census", census},
                        {"epsilon", eps},
                        {"trees", trees}};
            json data = {{"census",
                          {{"equilateral", census.equilateral},
                           {"isosceles", census.isosceles},
                           {"violating", census.violating}}},
                         {"overlaps_csv", csv.str()}};
            return finish(sc, rep, rows, data);
          }};
}

ConstraintMatrix read_constraint(const ConfigReader& r, double q_star, double eps) {
  try {
    if (r.has("matrix")) {
      const auto m = r.child("matrix");
      if (!m.node().is_array()) m.fail("matrix must be an array of rows");
      const std::size_t n = m.node().size();
      std::vector<double> e;
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = m.element(i);
        if (!row.node().is_array() || row.node().size() != n) row.fail("matrix must be square");
        for (std::size_t j = 0; j < n; ++j) {
          const auto x = row.element(j);
          if (!x.node().is_number()) x.fail("expected a number");
          e.push_back(x.node().get<double>());
        }
      }
      return ConstraintMatrix(n, e, q_star, eps);
    }
    return ConstraintMatrix::uniform(read_n(r, 2), r.number("off"), q_star, eps);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
}

PreparedSuite prepare_extension(const ExperimentConfig& cfg, const SuiteConfig& sc,
                                const ConfigReader& r, std::shared_ptr<MeasureSource> src,
                                Budget budget) {
  r.only({"name", "kind", "source", "budget", "epsilon", "n", "off", "matrix"});
  const double eps = r.number("epsilon", cfg.defaults.epsilon);
  const auto a = read_constraint(r, src->q_star(), eps);
  const double z = cfg.defaults.z_threshold;
  return {sc.name, sc.kind, [=](std::uint64_t seed, unsigned jobs) {
            const auto rep = extension_probe(*src, a, budget, seed, {z, jobs});
            SummaryRow row{sc.name, sc.kind, "extension", a.size(), rep.extension.mean,
                           rep.extension.std_error, rep.support.mean, rep.support.std_error,
                           rep.extension.mean, rep.extension.std_error,
                           z_score(rep.extension.mean, rep.extension.std_error), rep.verdict};
            json j = rep;
            j["A"] = a;
            return finish(sc, j, {row});
          }};
}

PreparedSuite prepare_barycenter(const ExperimentConfig&, const SuiteConfig& sc,
                                 const ConfigReader& r) {
  r.only({"name", "kind", "budget", "a", "b", "c", "q_star", "m", "within", "m_max"});
  const double a = r.number("a"), b = r.number("b"), c = r.number("c");
  const double q = r.number("q_star");
  const std::size_t m = r.integer("m");
  const double within = r.number("within", c);
  const std::size_t m_max = r.integer("m_max", 500);
  if (!(a < b && b <= c && c < q)) r.fail("need a < b <= c < q_star");
  if (m < 1) r.child("m").fail("m must be >= 1");
  if (within > c) r.child("within").fail("within-group overlap must be <= c");
  return {sc.name, sc.kind, [=](std::uint64_t, unsigned) {
            const auto gram = pattern_gram(a, b, c, q, m, within);
            const auto rep = barycenter_diagnostic(gram, contiguous_groups(m), a, b, c);
            const auto fail_m = smallest_non_psd_m(a, b, c, q, m_max);
            const bool ok = !rep.realizable || (rep.norms_ok && rep.distance_ok && rep.gap_ok);
            std::vector<SummaryRow> rows{
                {sc.name, sc.kind, "bounds", m, rep.gap, 0.0, rep.gap_bound, 0.0,
                 rep.gap - rep.gap_bound, 0.0, 0.0, ok ? "pass" : "fail"},
                {sc.name, sc.kind, "psd_failure", m_max,
                 fail_m ? static_cast<double>(*fail_m) : std::nan(""), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                 fail_m ? "pass" : "fail"}};
            json j = {{"report", rep}, {"m_max", m_max}};
            j["smallest_non_psd_m"] = fail_m ? json(*fail_m) : json(nullptr);
            return finish(sc, j, rows);
          }};
}

}  // namespace

std::vector<PreparedSuite> prepare_suites(const ExperimentConfig& cfg, double budget_scale) {
  if (!(budget_scale > 0.0) || !std::isfinite(budget_scale))
    throw ConfigError("--budget-scale must be a positive number");
  SourceMap sources;
  for (const auto& s : cfg.sources) sources[s.name] = make_source(cfg.document, s);
  std::vector<PreparedSuite> out;
  for (const auto& sc : cfg.suites) {
    const ConfigReader r(cfg.document, sc.params, sc.pointer);
    Budget budget = sc.budget.scaled(budget_scale);
    try {
      if (sc.kind == "barycenter") {
        out.push_back(prepare_barycenter(cfg, sc, r));
        continue;
      }
      auto src = sources.at(sc.source);
      if (sc.kind == "gg") out.push_back(prepare_gg(cfg, sc, r, src, budget));
      else if (sc.kind == "mixture") out.push_back(prepare_mixture(cfg, sc, r, src, budget));
      else if (sc.kind == "invariance") out.push_back(prepare_invariance(cfg, sc, r, src, budget));
      else if (sc.kind == "theorem2") out.push_back(prepare_theorem2(cfg, sc, r, src, budget));
      else if (sc.kind == "ultrametric") out.push_back(prepare_ultrametric(cfg, sc, r, src, budget));
      else if (sc.kind == "extension") out.push_back(prepare_extension(cfg, sc, r, src, budget));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      r.fail(e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "suite,kind,test,n,lhs,lhs_se,rhs,rhs_se,difference,se,z,verdict\n";
  for (const auto& r : rows)
    os << r.suite << ',' << r.kind << ',' << r.test << ',' << r.n << ',' << fmt(r.lhs) << ','
       << fmt(r.lhs_se) << ',' << fmt(r.rhs) << ',' << fmt(r.rhs_se) << ',' << fmt(r.difference)
       << ',' << fmt(r.se) << ',' << fmt(r.z) << ',' << r.verdict << '\n';
  return os.str();
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %-18s %3s %14s %14s %12s %9s  %s\n", "suite", "test", "n",
                "lhs", "rhs", "se", "z", "verdict");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-20s %-18s %3zu %14.8g %14.8g %12.4g %9.3g  %s\n",
                  r.suite.c_str(), r.test.c_str(), r.n, r.lhs, r.rhs, r.se, r.z, r.verdict.c_str());
    os << buf;
  }
  return os.str();
}

namespace {

// Plot data and the CSV summary, regenerated from the suite reports.
std::vector<SummaryRow> write_derived(const fs::path& dir, const std::vector<json>& reports) {
  std::vector<SummaryRow> rows;
  for (const auto& rep : reports) {
    const auto name = rep.at("suite").get<std::string>();
    for (const auto& r : rep.at("rows")) rows.push_back(row_from_json(r));
    const auto& data = rep.at("data");
    if (data.contains("phi")) {
      std::string s = "# t estimate se\n";
      for (const auto& p : data.at("phi"))
        s += fmt(p[0].get<double>()) + " " + fmt(p[1].get<double>()) + " " + fmt(p[2].get<double>()) + "\n";
      write_file_atomic(dir / "data" / ("phi_" + name + ".dat"), s);
    }
    if (data.contains("census")) {
      const auto& c = data.at("census");
      std::string s = "# class count\n";
      s += "0 equilateral " + std::to_string(c.at("equilateral").get<std::size_t>()) + "\n";
      s += "1 isosceles " + std::to_string(c.at("isosceles").get<std::size_t>()) + "\n";
      s += "2 violating " + std::to_string(c.at("violating").get<std::size_t>()) + "\n";
      write_file_atomic(dir / "data" / ("census_" + name + ".dat"), s);
    }
    if (data.contains("overlaps_csv"))
      write_file_atomic(dir / "data" / ("overlaps_" + name + ".csv"),
                        data.at("overlaps_csv").get<std::string>());
  }
  write_file_atomic(dir / "summary.csv", summary_csv(rows));
  return rows;
}

}  // namespace

void to_json(json& j, const RunManifest& m) {
  auto suites = json::array();
  for (const auto& s : m.suites)
    suites.push_back({{"name", s.name}, {"kind", s.kind}, {"report", s.report}, {"verdict", s.verdict}});
  j = {{"tool_version", m.tool_version}, {"config_hash", m.config_hash},
       {"seed", m.seed},                 {"budget_scale", m.budget_scale},
       {"suites", suites},               {"aggregate", m.aggregate},
       {"runtime_seconds", m.runtime_seconds}};
}

void from_json(const json& j, RunManifest& m) {
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.budget_scale = j.value("budget_scale", 1.0);
  m.suites.clear();
  for (const auto& s : j.at("suites"))
    m.suites.push_back({s.at("name").get<std::string>(), s.at("kind").get<std::string>(),
                        s.at("report").get<std::string>(), s.at("verdict").get<std::string>()});
  m.aggregate = j.at("aggregate").get<std::string>();
  m.runtime_seconds = j.value("runtime_seconds", 0.0);
}

std::vector<std::string> failing_suites(const RunManifest& m) {
  std::vector<std::string> out;
  for (const auto& s : m.suites)
    if (s.verdict == "fail") out.push_back(s.name);
  return out;
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const auto seed = options.seed ? options.seed : cfg.seed;
  if (!seed) throw ConfigError(cfg.document.origin + ": no seed given (set 'seed' or pass --seed)");
  const unsigned jobs = options.jobs.value_or(cfg.jobs);
  const fs::path dir = options.out_dir.value_or(cfg.out_dir);
  const auto suites = prepare_suites(cfg, options.budget_scale);

  RunManifest manifest;
  manifest.config_hash = hex64(fnv1a64(cfg.document.text));
  manifest.seed = *seed;
  manifest.budget_scale = options.budget_scale;
  std::vector<json> reports;
  for (const auto& s : suites) {
    log << "running " << s.name << " (" << s.kind << ")\n" << std::flush;
    const auto outcome = s.run(derive_seed(*seed, {fnv1a64(s.name)}), jobs);
    const std::string rel = "reports/" + s.name + ".json";
    write_file_atomic(dir / rel, outcome.report.dump(2) + "\n");
    manifest.suites.push_back({s.name, s.kind, rel, outcome.verdict});
    reports.push_back(outcome.report);
  }
  const auto rows = write_derived(dir, reports);
  log << summary_table(rows);
  manifest.aggregate = failing_suites(manifest).empty() ? "pass" : "fail";
  manifest.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file_atomic(dir / "manifest.json", json(manifest).dump(2) + "\n");
  return manifest;
}

int run_command(const fs::path& config, const RunOptions& options, std::ostream& out,
                std::ostream& err) {
  RunManifest manifest;
  try {
    const auto cfg = parse_experiment(load_config_file(config));
    manifest = run_experiment(cfg, options, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  const auto failing = failing_suites(manifest);
  if (!failing.empty()) {
    err << "failing suites:";
    for (const auto& f : failing) err << " " << f;
    err << "\n";
    return 1;
  }
  return 0;
}

int summarize_command(const fs::path& manifest_path, std::ostream& out, std::ostream& err) {
  RunManifest manifest;
  try {
    std::ifstream in(manifest_path);
    if (!in) {
      err << manifest_path.string() << ": cannot open manifest\n";
      return 2;
    }
    manifest = json::parse(in).get<RunManifest>();
  } catch (const std::exception& e) {
    err << manifest_path.string() << ": invalid manifest: " << e.what() << "\n";
    return 2;
  }
  const fs::path dir = manifest_path.parent_path();
  std::vector<json> reports;
  std::vector<std::string> missing;
  for (const auto& s : manifest.suites) {
    std::ifstream in(dir / s.report);
    if (!in) {
      missing.push_back(s.report);
      continue;
    }
    reports.push_back(json::parse(in));
  }
  if (!missing.empty()) {
    err << "missing report files:\n";
    for (const auto& m : missing) err << "  " << m << "\n";
    return 1;
  }
  const auto rows = write_derived(dir, reports);
  out << summary_table(rows);
  out << "aggregate: " << manifest.aggregate << "\n";
  return 0;
}

}  // namespace gglab

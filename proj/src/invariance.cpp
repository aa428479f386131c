#include "gglab/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gglab/parallel.hpp"
#include "streams.hpp"

namespace gglab {

double BoundedFunctionFamily::bound(double q_star) const noexcept {
  double b = 0.0;
  for (const auto& f : fs) b = std::max(b, f.bound(q_star));
  return b;
}

BoundedFunctionFamily BoundedFunctionFamily::scaled(double t) const {
  BoundedFunctionFamily out;
  for (const auto& f : fs) out.fs.push_back(f.scaled(t));
  return out;
}

double eval_F(const BoundedFunctionFamily& fs, std::span<const double> overlaps) {
  if (overlaps.size() < fs.size()) throw InvalidInput("eval_F: fewer overlaps than functions");
  double s = 0.0;
  for (std::size_t k = 0; k < fs.size(); ++k) s += fs.fs[k](overlaps[k]);
  return s;
}

double eval_F_l(const BoundedFunctionFamily& fs, std::span<const double> overlaps, std::size_t l,
                std::span<const double> mu_means) {
  if (l >= fs.size()) return eval_F(fs, overlaps);
  if (overlaps.size() < fs.size()) throw InvalidInput("eval_F_l: fewer overlaps than functions");
  if (mu_means.size() < fs.size()) throw InvalidInput("eval_F_l: need one mean per function");
  double s = 0.0;
  for (std::size_t k = 0; k < fs.size(); ++k) s += k == l ? mu_means[k] : fs.fs[k](overlaps[k]);
  return s;
}

// ---------------------------------------------------------------------------
// Partitions and the T maps

PartitionSpec PartitionSpec::threshold(std::size_t replica, double c) {
  PartitionSpec p;
  p.axes.push_back({replica, {c}});
  return p;
}

std::size_t PartitionSpec::cells() const noexcept {
  std::size_t c = 1;
  for (const auto& a : axes) c *= a.cuts.size() + 1;
  return c;
}

std::size_t PartitionSpec::cell_of(std::span<const double> overlaps) const {
  std::size_t cell = 0;
  for (const auto& a : axes) {
    if (a.replica >= overlaps.size()) throw InvalidInput("partition: axis replica out of range");
    const double x = overlaps[a.replica];
    const auto above = static_cast<std::size_t>(
        a.cuts.end() - std::upper_bound(a.cuts.begin(), a.cuts.end(), x));
    cell = cell * (a.cuts.size() + 1) + above;
  }
  return cell;
}

std::size_t PartitionSpec::min_replicas() const noexcept {
  std::size_t n = 0;
  for (const auto& a : axes) n = std::max(n, a.replica + 1);
  return n;
}

void PartitionSpec::validate() const {
  for (const auto& a : axes) {
    if (a.cuts.empty()) throw InvalidInput("partition: axis without cuts");
    for (std::size_t i = 0; i < a.cuts.size(); ++i) {
      if (!std::isfinite(a.cuts[i])) throw InvalidInput("partition: cuts must be finite");
      if (i > 0 && !(a.cuts[i] > a.cuts[i - 1]))
        throw InvalidInput("partition: cuts must be strictly increasing");
    }
  }
}

bool is_weight_vector(std::span<const double> w, double tol) noexcept {
  if (w.empty()) return false;
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0 && x <= 1.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

namespace {

struct ClassRecord {
  double mass;
  double f;  // F at the class, relative to the reference value
  std::size_t cell;
};

void require_inner(const Realization& g, bool allow_inner_mc, const char* what) {
  if (!g.is_atomic() && !allow_inner_mc)
    throw Unsupported(std::string(what) +
                      ": exact weights need an atomic realization; enable inner Monte Carlo");
}

}  // namespace

WeightVector partition_weights(Realization& g, std::span<const Point> replicas,
                               const PartitionSpec& partition, Rng& rng, bool allow_inner_mc,
                               std::size_t inner_m) {
  require_inner(g, allow_inner_mc, "partition_weights");
  partition.validate();
  if (partition.min_replicas() > replicas.size())
    throw InvalidInput("partition_weights: partition references more replicas than given");
  WeightVector w(partition.cells(), 0.0);
  double total = 0.0;
  g.for_each_class(replicas, rng, inner_m, [&](double mass, std::span<const double> o) {
    w[partition.cell_of(o)] += mass;
    total += mass;
  });
  for (double& x : w) x /= total;
  return w;
}

TMapResult t_map(std::span<const double> w, double t) {
  if (w.size() != 2) throw InvalidInput("t_map: needs a two-cell weight vector");
  const double w1 = w[0];
  const double et = std::exp(t);
  TMapResult out;
  out.delta = 1.0 + w1 * std::expm1(t);
  out.weights = {w1 * et / out.delta, (1.0 - w1) / out.delta};
  return out;
}

WeightVector general_T(std::span<const double> w, std::span<const double> log_cell_factors) {
  if (w.size() != log_cell_factors.size())
    throw InvalidInput("general_T: one factor per cell required");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < w.size(); ++a)
    if (w[a] > 0.0) top = std::max(top, log_cell_factors[a]);
  WeightVector out(w.size(), 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    if (w[a] > 0.0) out[a] = w[a] * std::exp(log_cell_factors[a] - top);
    total += out[a];
  }
  if (!(total > 0.0)) throw InvalidInput("general_T: weight vector has no mass");
  for (double& x : out) x /= total;
  return out;
}

WeightVector general_T(Realization& g, std::span<const Point> replicas,
                       const PartitionSpec& partition, const BoundedFunctionFamily& fs, Rng& rng,
                       bool allow_inner_mc, std::size_t inner_m) {
  require_inner(g, allow_inner_mc, "general_T");
  partition.validate();
  if (fs.size() > replicas.size() || partition.min_replicas() > replicas.size())
    throw InvalidInput("general_T: more functions or partition axes than replicas");
  std::vector<ClassRecord> classes;
  double top = -std::numeric_limits<double>::infinity();
  g.for_each_class(replicas, rng, inner_m, [&](double mass, std::span<const double> o) {
    const double f = eval_F(fs, o);
    top = std::max(top, f);
    classes.push_back({mass, f, partition.cell_of(o)});
  });
  WeightVector out(partition.cells(), 0.0);
  double total = 0.0;
  for (const auto& c : classes) {
    const double v = c.mass * std::exp(c.f - top);
    out[c.cell] += v;
    total += v;
  }
  for (double& x : out) x /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Reweighted estimators

namespace {

struct MuBlock {
  std::vector<double> means;  // point estimate of E<f_l(R12)>
  Block block;                // per-realization means, empty when exact
};

MuBlock estimate_mu(const BoundedFunctionFamily& fs, const MeasureSource& source,
                    const Budget& budget, std::uint64_t seed, const RunContext& ctx,
                    const PhiOptions& options) {
  MuBlock out;
  if (options.mu_mode == MuMode::exact) {
    if (auto law = source.exact_overlap_law()) {
      for (const auto& f : fs.fs) out.means.push_back(law->expectation(f));
      return out;
    }
  }
  out.block = Block(budget.mu_block(), fs.size());
  parallel_for(out.block.rows(), ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::mu_realization(seed, r));
    Rng rng = make_rng(streams::mu_replicas(seed, r));
    std::vector<RunningMean> m(fs.size());
    for (std::size_t k = 0; k < budget.mu_pairs; ++k) {
      const auto pts = g->sample(2, rng);
      const double x = g->overlap(pts[0], pts[1]);
      for (std::size_t l = 0; l < fs.size(); ++l) m[l].add(fs.fs[l](x));
    }
    auto row = out.block.row(r);
    for (std::size_t l = 0; l < fs.size(); ++l) row[l] = m[l].mean();
  });
  out.means = out.block.column_means();
  return out;
}

// Everything one replica tuple contributes: the overlap matrix, the sum of
// F_l - F_ref and the classes of sigma with F(sigma) - F_ref, where F_ref is F
// at sigma = sigma^1. Measuring F against one reference keeps the ratio
// exactly 1 whenever F is constant.
struct TupleTerms {
  OverlapMatrix overlaps;
  double sum_f_l = 0.0;
  std::vector<ClassRecord> classes;
};

TupleTerms tuple_terms(Realization& g, std::span<const Point> pts, const BoundedFunctionFamily& fs,
                       std::span<const double> mu, Rng& rng, std::size_t inner_m,
                       const PartitionSpec* partition) {
  TupleTerms out;
  out.overlaps = overlaps_of(g, pts);
  const std::size_t n = pts.size();
  std::vector<double> row(n);
  auto load_row = [&](std::size_t l) {
    for (std::size_t k = 0; k < n; ++k) row[k] = out.overlaps(l, k);
  };
  load_row(0);
  const double ref = eval_F(fs, row);
  for (std::size_t l = 0; l < n; ++l) {
    load_row(l);
    out.sum_f_l += eval_F_l(fs, row, l, mu) - ref;
  }
  g.for_each_class(pts, rng, inner_m, [&](double mass, std::span<const double> o) {
    out.classes.push_back({mass, eval_F(fs, o) - ref, partition ? partition->cell_of(o) : 0});
  });
  return out;
}

// exp(t sum_l (F_l - F_ref)) / (<exp(t (F - F_ref))>_)^n
double ratio(const TupleTerms& terms, double t, std::size_t n) {
  double den = 0.0;
  double total = 0.0;
  for (const auto& c : terms.classes) {
    den += c.mass * std::exp(t * c.f);
    total += c.mass;
  }
  return std::exp(t * terms.sum_f_l) / std::pow(den / total, static_cast<double>(n));
}

void check_family(const BoundedFunctionFamily& fs, const char* what) {
  if (fs.size() < 1) throw InvalidInput(std::string(what) + ": need at least one function f_l");
}

nlohmann::json base_metadata(const MeasureSource& source, const Budget& budget,
                             std::uint64_t seed, std::size_t n, const MuBlock& mu) {
  nlohmann::json m = {{"n", n},
                      {"source", source.describe()},
                      {"realizations", budget.realizations},
                      {"tuples", budget.tuples},
                      {"mu_realizations", mu.block.rows()},
                      {"mu_pairs", budget.mu_pairs},
                      {"bootstrap", budget.bootstrap},
                      {"seed", seed},
                      {"mu_means", mu.means},
                      {"mu_mode", mu.block.rows() ? "estimated" : "exact"}};
  if (!source.is_atomic()) {
    m["inner_m"] = budget.inner_m;
    m["ratio_bias"] = "inner Monte Carlo average; bias of order 1/inner_m";
  }
  return m;
}

// Main-block columns: Phi * ratio(t) per t. Bootstrap replicates of phi(t)
// rescale by exp(t sum_l (mu*_l - mu_l)), carrying the uncertainty of mu.
struct PhiRun {
  Block main;
  MuBlock mu;
};

PhiRun run_phi(std::span<const double> ts, const OverlapFunction& phi,
               const BoundedFunctionFamily& fs, const MeasureSource& source, const Budget& budget,
               std::uint64_t seed, const RunContext& ctx, const PhiOptions& options) {
  check_family(fs, "phi_estimate");
  const std::size_t n = fs.size();
  if (phi.min_replicas() > n) throw InvalidInput("phi_estimate: Phi references replicas beyond n");
  for (double t : ts)
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("phi_estimate: t must be finite and >= 0");
  budget.validate();
  PhiRun run;
  run.mu = estimate_mu(fs, source, budget, seed, ctx, options);
  run.main = Block(budget.realizations, ts.size());
  parallel_for(run.main.rows(), ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    std::vector<RunningMean> acc(ts.size());
    for (std::size_t k = 0; k < budget.tuples; ++k) {
      const auto pts = g->sample(n, rng);
      const auto terms = tuple_terms(*g, pts, fs, run.mu.means, rng, budget.inner_m, nullptr);
      const double p = phi(terms.overlaps);
      for (std::size_t i = 0; i < ts.size(); ++i) acc[i].add(p * ratio(terms, ts[i], n));
    }
    auto row = run.main.row(r);
    for (std::size_t i = 0; i < ts.size(); ++i) row[i] = acc[i].mean();
  });
  return run;
}

double mu_shift(std::span<const double> aux, std::span<const double> mu_hat) {
  double s = 0.0;
  for (std::size_t l = 0; l < aux.size(); ++l) s += aux[l] - mu_hat[l];
  return s;
}

}  // namespace

Estimate phi_estimate(double t, const OverlapFunction& phi, const BoundedFunctionFamily& fs,
                      const MeasureSource& source, const Budget& budget, std::uint64_t seed,
                      const RunContext& ctx, const PhiOptions& options) {
  const double ts[] = {t};
  const auto run = run_phi(ts, phi, fs, source, budget, seed, ctx, options);
  const auto& mu_hat = run.mu.means;
  const std::vector<BlockStatistic> stats{
      [t, &mu_hat](std::span<const double> m, std::span<const double> a) {
        return m[0] * std::exp(t * mu_shift(a, mu_hat));
      }};
  const auto se =
      bootstrap_standard_errors(run.main, run.mu.block, stats, budget.bootstrap, streams::bootstrap(seed));
  return {run.main.column_means()[0], se[0], run.main.rows()};
}

InvarianceResult invariance_test(const OverlapFunction& phi, const BoundedFunctionFamily& fs,
                                 const MeasureSource& source, std::span<const double> t_grid,
                                 const Budget& budget, std::uint64_t seed, const RunContext& ctx,
                                 const PhiOptions& options) {
  const double h = options.derivative_step;
  if (!(h > 0.0)) throw InvalidInput("invariance_test: derivative step must be positive");
  // Column 0 is t = 0, then the grid, then the derivative step.
  std::vector<double> ts{0.0};
  ts.insert(ts.end(), t_grid.begin(), t_grid.end());
  ts.push_back(h);
  const auto run = run_phi(ts, phi, fs, source, budget, seed, ctx, options);
  const auto& mu_hat = run.mu.means;
  const auto means = run.main.column_means();
  const std::size_t rows = run.main.rows();

  auto phi_at = [&](std::size_t i) {
    return [&, i](std::span<const double> m, std::span<const double> a) {
      return m[i] * std::exp(ts[i] * mu_shift(a, mu_hat));
    };
  };
  std::vector<BlockStatistic> stats;
  for (std::size_t i = 0; i < ts.size(); ++i) stats.push_back(phi_at(i));
  for (std::size_t i = 1; i + 1 < ts.size(); ++i)
    stats.push_back([&, i](std::span<const double> m, std::span<const double> a) {
      return m[0] - phi_at(i)(m, a);
    });
  const std::size_t last = ts.size() - 1;
  stats.push_back([&](std::span<const double> m, std::span<const double> a) {
    return (phi_at(last)(m, a) - m[0]) / h;
  });
  const auto se =
      bootstrap_standard_errors(run.main, run.mu.block, stats, budget.bootstrap, streams::bootstrap(seed));

  InvarianceResult out;
  out.t_grid.assign(t_grid.begin(), t_grid.end());
  const auto meta = base_metadata(source, budget, seed, fs.size(), run.mu);
  const Estimate phi0{means[0], se[0], rows};
  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    const Estimate phit{means[i], se[i], rows};
    out.phi.push_back(phit);
    TestReport rep;
    rep.name = "invariance";
    rep.lhs = phi0;
    rep.rhs = phit;
    rep.difference = {means[0] - means[i], se[ts.size() + i - 1], rows};
    rep.asserted = source.is_gg_reference();
    rep.metadata = meta;
    rep.metadata["t"] = ts[i];
    finalize(rep, ctx);
    out.reports.push_back(std::move(rep));
  }
  TestReport& d = out.derivative;
  d.name = "invariance_derivative";
  d.lhs = {(means[last] - means[0]) / h, se.back(), rows};
  d.rhs = {0.0, 0.0, rows};
  d.difference = d.lhs;
  d.asserted = source.is_gg_reference();
  d.metadata = meta;
  d.metadata["h"] = h;
  finalize(d, ctx);
  return out;
}

TestReport theorem2_test(const MeasureSource& source, const PartitionSpec& partition,
                         const WeightedOverlapFunction& varphi, const BoundedFunctionFamily& fs,
                         std::size_t n, const Budget& budget, std::uint64_t seed,
                         const RunContext& ctx, const PhiOptions& options) {
  if (n < 1) throw InvalidInput("theorem2_test: n must be >= 1");
  if (fs.size() != n) throw InvalidInput("theorem2_test: need exactly n functions f_l");
  if (!source.is_atomic() && !options.inner_mc_weights)
    throw Unsupported("theorem2_test: exact W needs an atomic source; enable inner Monte Carlo");
  partition.validate();
  if (partition.min_replicas() > n || varphi.base().min_replicas() > n)
    throw InvalidInput("theorem2_test: partition or varphi references replicas beyond n");
  for (const auto& wf : varphi.weight_factors())
    if (wf.cell >= partition.cells()) throw InvalidInput("theorem2_test: varphi references a missing cell");
  budget.validate();

  const MuBlock mu = estimate_mu(fs, source, budget, seed, ctx, options);
  // Columns: varphi(R, W), varphi(R, T(W)) * ratio, and their per-tuple difference.
  Block main(budget.realizations, 3);
  parallel_for(main.rows(), ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    RunningMean lhs, rhs, diff;
    WeightVector w(partition.cells()), tw(partition.cells());
    for (std::size_t k = 0; k < budget.tuples; ++k) {
      const auto pts = g->sample(n, rng);
      const auto terms = tuple_terms(*g, pts, fs, mu.means, rng, budget.inner_m, &partition);
      std::fill(w.begin(), w.end(), 0.0);
      std::fill(tw.begin(), tw.end(), 0.0);
      double total = 0.0, den = 0.0;
      for (const auto& c : terms.classes) {
        const double e = c.mass * std::exp(c.f);
        w[c.cell] += c.mass;
        tw[c.cell] += e;
        total += c.mass;
        den += e;
      }
      for (auto& x : w) x /= total;
      for (auto& x : tw) x /= den;
      const double a = varphi(terms.overlaps, w);
      const double b = varphi(terms.overlaps, tw) * ratio(terms, 1.0, n);
      lhs.add(a);
      rhs.add(b);
      diff.add(a - b);
    }
    auto row = main.row(r);
    row[0] = lhs.mean();
    row[1] = rhs.mean();
    row[2] = diff.mean();
  });

  const auto& mu_hat = mu.means;
  auto rhs_at = [&mu_hat](std::span<const double> m, std::span<const double> a) {
    return m[1] * std::exp(mu_shift(a, mu_hat));
  };
  const std::vector<BlockStatistic> stats{
      [](std::span<const double> m, std::span<const double>) { return m[0]; },
      rhs_at,
      [&](std::span<const double> m, std::span<const double> a) { return m[0] - rhs_at(m, a); }};
  const auto se = bootstrap_standard_errors(main, mu.block, stats, budget.bootstrap, streams::bootstrap(seed));
  const auto means = main.column_means();

  TestReport rep;
  rep.name = "theorem2";
  rep.lhs = {means[0], se[0], main.rows()};
  rep.rhs = {means[1], se[1], main.rows()};
  rep.difference = {means[2], se[2], main.rows()};
  rep.asserted = source.is_gg_reference();
  rep.metadata = base_metadata(source, budget, seed, n, mu);
  rep.metadata["cells"] = partition.cells();
  finalize(rep, ctx);
  return rep;
}

// ---------------------------------------------------------------------------
// JSON (replica labels 1-based)

void to_json(nlohmann::json& j, const PartitionSpec& p) {
  auto axes = nlohmann::json::array();
  for (const auto& a : p.axes) axes.push_back({{"replica", a.replica + 1}, {"cuts", a.cuts}});
  j = {{"axes", axes}};
}

void from_json(const nlohmann::json& j, PartitionSpec& p) {
  p.axes.clear();
  for (const auto& a : j.value("axes", nlohmann::json::array())) {
    const auto replica = a.at("replica").get<long long>();
    if (replica < 1) throw InvalidInput("partition: replica labels start at 1");
    PartitionSpec::Axis axis;
    axis.replica = static_cast<std::size_t>(replica - 1);
    axis.cuts = a.at("cuts").get<std::vector<double>>();
    p.axes.push_back(std::move(axis));
  }
  p.validate();
}

void to_json(nlohmann::json& j, const BoundedFunctionFamily& f) { j = f.fs; }

void from_json(const nlohmann::json& j, BoundedFunctionFamily& f) {
  f.fs = j.get<std::vector<ScalarFunction>>();
}

}  // namespace gglab

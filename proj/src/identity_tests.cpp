#include "gglab/identity_tests.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gglab/parallel.hpp"
#include "streams.hpp"

namespace gglab {

namespace {

nlohmann::json budget_metadata(const Budget& b, std::uint64_t seed) {
  return {{"realizations", b.realizations}, {"tuples", b.tuples},
          {"mu_realizations", b.mu_block()}, {"mu_pairs", b.mu_pairs},
          {"bootstrap", b.bootstrap},       {"seed", seed}};
}

Estimate make_estimate(double mean, double se, std::size_t n) { return {mean, se, n}; }

}  // namespace

Estimate mean_overlap_function(const MeasureSource& source, const OverlapFunction& f, std::size_t n,
                               const Budget& budget, std::uint64_t seed, const RunContext& ctx) {
  if (n < 1) throw InvalidInput("mean_overlap_function: n must be >= 1");
  if (f.min_replicas() > n) throw InvalidInput("mean_overlap_function: f needs more replicas than n");
  budget.validate();
  std::vector<double> per_realization(budget.realizations);
  parallel_for(budget.realizations, ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    RunningMean m;
    for (std::size_t t = 0; t < budget.tuples; ++t) {
      const auto pts = g->sample(n, rng);
      m.add(f(overlaps_of(*g, pts)));
    }
    per_realization[r] = m.mean();
  });
  return estimate_from(per_realization);
}

TestReport gg_identity_test(const MeasureSource& source, const OverlapFunction& f,
                            const ScalarFunction& psi, std::size_t n, const Budget& budget,
                            std::uint64_t seed, const RunContext& ctx) {
  if (n < 2) throw InvalidInput("gg_identity_test: n must be >= 2");
  if (f.min_replicas() > n) throw InvalidInput("gg_identity_test: f references replicas beyond n");
  budget.validate();
  const double inv_n = 1.0 / static_cast<double>(n);

  Block mu(budget.mu_block(), 1);
  parallel_for(mu.rows(), ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::mu_realization(seed, r));
    Rng rng = make_rng(streams::mu_replicas(seed, r));
    RunningMean m;
    for (std::size_t k = 0; k < budget.mu_pairs; ++k) {
      const auto pts = g->sample(2, rng);
      m.add(psi(g->overlap(pts[0], pts[1])));
    }
    mu.row(r)[0] = m.mean();
  });
  const double psi_bar = mu.column_means()[0];

  // Columns: f psi(R_{1,n+1}), f, and the per-tuple LHS - RHS written as a
  // sum of differences so that degenerate sources cancel exactly.
  Block main(budget.realizations, 3);
  parallel_for(main.rows(), ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    RunningMean lhs, fm, diff;
    for (std::size_t t = 0; t < budget.tuples; ++t) {
      const auto pts = g->sample(n + 1, rng);
      const OverlapMatrix R = overlaps_of(*g, pts);
      const double fv = f(R);
      const double p = psi(R(0, n));
      double s = (p - psi_bar) * inv_n;
      for (std::size_t l = 1; l < n; ++l) s += (p - psi(R(0, l))) * inv_n;
      lhs.add(fv * p);
      fm.add(fv);
      diff.add(fv * s);
    }
    auto row = main.row(r);
    row[0] = lhs.mean();
    row[1] = fm.mean();
    row[2] = diff.mean();
  });

  const auto means = main.column_means();
  const BlockStatistic lhs_stat = [](std::span<const double> m, std::span<const double>) {
    return m[0];
  };
  const BlockStatistic diff_stat = [psi_bar, inv_n](std::span<const double> m,
                                                    std::span<const double> a) {
    return m[2] - m[1] * (a[0] - psi_bar) * inv_n;
  };
  const BlockStatistic rhs_stat = [&](std::span<const double> m, std::span<const double> a) {
    return m[0] - diff_stat(m, a);
  };
  const std::vector<BlockStatistic> stats{lhs_stat, rhs_stat, diff_stat};
  const auto se = bootstrap_standard_errors(main, mu, stats, budget.bootstrap, streams::bootstrap(seed));

  TestReport rep;
  rep.name = "gg_identity";
  rep.lhs = make_estimate(means[0], se[0], main.rows());
  rep.difference = make_estimate(means[2], se[2], main.rows());
  rep.rhs = make_estimate(means[0] - means[2], se[1], main.rows());
  rep.asserted = source.is_gg_reference();
  rep.metadata = budget_metadata(budget, seed);
  rep.metadata["n"] = n;
  rep.metadata["source"] = source.describe();
  rep.metadata["psi_mean"] = psi_bar;
  rep.metadata["f"] = f;
  rep.metadata["psi"] = psi;
  finalize(rep, ctx);
  return rep;
}

namespace {

using ValueKey = std::int64_t;
using PatternKey = std::vector<ValueKey>;

struct Discretizer {
  std::size_t bins;
  double q_star;

  ValueKey key(double x) const {
    if (bins == 0) return std::llround(x * 1e9);
    const double u = (x + q_star) / (2.0 * q_star) * static_cast<double>(bins);
    return std::clamp<ValueKey>(static_cast<ValueKey>(std::floor(u)), 0,
                                static_cast<ValueKey>(bins) - 1);
  }
  double representative(ValueKey k) const {
    if (bins == 0) return static_cast<double>(k) / 1e9;
    return -q_star + (static_cast<double>(k) + 0.5) * 2.0 * q_star / static_cast<double>(bins);
  }
};

struct PatternCounts {
  std::size_t count = 0;
  std::map<ValueKey, std::size_t> next;  // key of R_{1,n+1} -> count
};

}  // namespace

MixtureReport mixture_law_check(const MeasureSource& source, std::size_t n, std::size_t bins,
                                const Budget& budget, std::uint64_t seed, const RunContext& ctx) {
  if (n < 2) throw InvalidInput("mixture_law_check: n must be >= 2");
  if (bins == 0 && !source.is_atomic())
    throw InvalidInput("mixture_law_check: exact patterns need an atomic source; set bins > 0");
  budget.validate();
  const Discretizer disc{bins, source.q_star()};
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::map<PatternKey, PatternCounts>> local(budget.realizations);
  parallel_for(budget.realizations, ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    for (std::size_t t = 0; t < budget.tuples; ++t) {
      const auto pts = g->sample(n + 1, rng);
      const OverlapMatrix R = overlaps_of(*g, pts);
      PatternKey key;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) key.push_back(disc.key(R(i, j)));
      auto& pc = local[r][key];
      ++pc.count;
      ++pc.next[disc.key(R(0, n))];
    }
  });

  std::vector<std::map<ValueKey, std::size_t>> mu_local(budget.mu_block());
  parallel_for(mu_local.size(), ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::mu_realization(seed, r));
    Rng rng = make_rng(streams::mu_replicas(seed, r));
    for (std::size_t k = 0; k < budget.mu_pairs; ++k) {
      const auto pts = g->sample(2, rng);
      ++mu_local[r][disc.key(g->overlap(pts[0], pts[1]))];
    }
  });

  std::map<PatternKey, std::size_t> totals;
  std::map<ValueKey, std::size_t> values;
  for (const auto& m : local)
    for (const auto& [p, pc] : m) {
      totals[p] += pc.count;
      for (const auto& [v, c] : pc.next) values.emplace(v, 0);
      for (std::size_t l = 0; l + 1 < n; ++l) values.emplace(p[l], 0);
    }
  for (const auto& m : mu_local)
    for (const auto& [v, c] : m) values.emplace(v, 0);
  {
    std::size_t idx = 0;
    for (auto& [v, i] : values) i = idx++;
  }
  const std::size_t nv = values.size();
  std::map<PatternKey, std::size_t> pattern_index;
  for (const auto& [p, c] : totals) pattern_index.emplace(p, pattern_index.size());

  // Main block: per pattern, the fraction of tuples with that pattern followed
  // by the fraction with that pattern and each value of R_{1,n+1}.
  const std::size_t stride = 1 + nv;
  Block main(budget.realizations, pattern_index.size() * stride);
  const double inv_tuples = 1.0 / static_cast<double>(budget.tuples);
  for (std::size_t r = 0; r < local.size(); ++r) {
    auto row = main.row(r);
    for (const auto& [p, pc] : local[r]) {
      const std::size_t base = pattern_index.at(p) * stride;
      row[base] = static_cast<double>(pc.count) * inv_tuples;
      for (const auto& [v, c] : pc.next)
        row[base + 1 + values.at(v)] = static_cast<double>(c) * inv_tuples;
    }
  }
  Block mu(mu_local.size(), nv);
  const double inv_pairs = 1.0 / static_cast<double>(budget.mu_pairs);
  for (std::size_t r = 0; r < mu_local.size(); ++r) {
    auto row = mu.row(r);
    for (const auto& [v, c] : mu_local[r]) row[values.at(v)] = static_cast<double>(c) * inv_pairs;
  }

  MixtureReport rep;
  rep.n = n;
  rep.bins = bins;
  rep.asserted = source.is_gg_reference();
  const auto mu_means = mu.column_means();
  for (const auto& [v, i] : values) {
    rep.mu_values.push_back(disc.representative(v));
    rep.mu_masses.push_back(mu_means[i]);
  }

  // Point masses of delta_{R_{1,l}}, l = 2..n, per pattern and value.
  auto delta_mass = [&](const PatternKey& p, std::size_t vi) {
    double s = 0.0;
    for (std::size_t l = 0; l + 1 < n; ++l)
      if (values.at(p[l]) == vi) s += inv_n;
    return s;
  };
  auto cell_diff = [&](const PatternKey& p, std::size_t pi, std::size_t vi,
                       std::span<const double> m, std::span<const double> a) {
    const double den = m[pi * stride];
    const double emp = den > 0.0 ? m[pi * stride + 1 + vi] / den : 0.0;
    return emp - (a[vi] * inv_n + delta_mass(p, vi));
  };

  std::vector<BlockStatistic> stats;
  std::vector<std::pair<PatternKey, std::size_t>> tested;
  for (const auto& [p, pi] : pattern_index) {
    if (totals.at(p) < kMixtureMinCount) continue;
    tested.emplace_back(p, pi);
    for (std::size_t vi = 0; vi < nv; ++vi)
      stats.push_back([&, p = p, pi = pi, vi](std::span<const double> m, std::span<const double> a) {
        return cell_diff(p, pi, vi, m, a);
      });
    stats.push_back([&, p = p, pi = pi](std::span<const double> m, std::span<const double> a) {
      double tv = 0.0;
      for (std::size_t vi = 0; vi < nv; ++vi) tv += std::abs(cell_diff(p, pi, vi, m, a));
      return 0.5 * tv;
    });
  }
  std::vector<double> se;
  if (!stats.empty())
    se = bootstrap_standard_errors(main, mu, stats, budget.bootstrap, streams::bootstrap(seed));

  const auto means = main.column_means();
  std::size_t s = 0;
  for (const auto& [p, pi] : pattern_index) {
    MixtureBin bin;
    for (auto k : p) bin.pattern.push_back(disc.representative(k));
    bin.count = totals.at(p);
    bin.flagged = bin.count < kMixtureMinCount;
    double tv = 0.0;
    for (const auto& [v, vi] : values) {
      MixtureCell cell;
      cell.value = disc.representative(v);
      const double den = means[pi * stride];
      cell.empirical = den > 0.0 ? means[pi * stride + 1 + vi] / den : 0.0;
      cell.mixture = mu_means[vi] * inv_n + delta_mass(p, vi);
      tv += std::abs(cell.empirical - cell.mixture);
      if (!bin.flagged) {
        cell.std_error = se[s++];
        cell.z_score = z_score(cell.empirical - cell.mixture, cell.std_error);
        if (!(std::abs(cell.z_score) < ctx.z_threshold)) rep.pass = false;
      }
      bin.cells.push_back(cell);
    }
    bin.tv = 0.5 * tv;
    if (!bin.flagged) bin.tv_std_error = se[s++];
    rep.patterns.push_back(std::move(bin));
  }
  rep.metadata = budget_metadata(budget, seed);
  rep.metadata["n"] = n;
  rep.metadata["bins"] = bins;
  rep.metadata["source"] = source.describe();
  rep.metadata["min_count"] = kMixtureMinCount;
  return rep;
}

void to_json(nlohmann::json& j, const MixtureReport& r) {
  auto patterns = nlohmann::json::array();
  for (const auto& b : r.patterns) {
    auto cells = nlohmann::json::array();
    for (const auto& c : b.cells)
      cells.push_back({{"value", c.value},
                       {"empirical", c.empirical},
                       {"mixture", c.mixture},
                       {"std_error", c.std_error},
                       {"z_score", json_number(c.z_score)}});
    patterns.push_back({{"pattern", b.pattern},
                        {"count", b.count},
                        {"flagged", b.flagged},
                        {"tv", b.tv},
                        {"tv_std_error", b.tv_std_error},
                        {"cells", cells}});
  }
  j = {{"name", "mixture_law"},
       {"n", r.n},
       {"bins", r.bins},
       {"mu", {{"values", r.mu_values}, {"masses", r.mu_masses}}},
       {"patterns", patterns},
       {"pass", r.pass},
       {"asserted", r.asserted},
       {"verdict", r.asserted ? (r.pass ? "pass" : "fail") : "report"},
       {"metadata", r.metadata}};
}

}  // namespace gglab

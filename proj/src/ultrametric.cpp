#include "gglab/ultrametric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "gglab/parallel.hpp"
#include "streams.hpp"

namespace gglab {

UltrametricityResult ultrametricity_stat(const MeasureSource& source, const Budget& budget,
                                         std::uint64_t seed, const RunContext& ctx) {
  budget.validate();
  std::vector<double> means(budget.realizations);
  std::vector<std::size_t> violations(budget.realizations, 0);
  parallel_for(budget.realizations, ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    RunningMean m;
    for (std::size_t t = 0; t < budget.tuples; ++t) {
      const auto pts = g->sample(3, rng);
      const int ok = ultrametric_indicator(g->overlap(pts[0], pts[1]), g->overlap(pts[0], pts[2]),
                                           g->overlap(pts[1], pts[2]));
      m.add(ok);
      if (!ok) ++violations[r];
    }
    means[r] = m.mean();
  });
  UltrametricityResult out;
  out.estimate = estimate_from(means);
  out.triples = budget.realizations * budget.tuples;
  for (auto v : violations) out.violations += v;
  return out;
}

// ---------------------------------------------------------------------------
// Triangle census

TriangleClass classify_triangle(const OverlapTriple& t, double epsilon) {
  auto s = t;
  std::sort(s.begin(), s.end());
  if (s[2] - s[0] < epsilon) return TriangleClass::equilateral;
  if (s[1] - s[0] < epsilon) return TriangleClass::isosceles;
  return TriangleClass::violating;
}

namespace {

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("triangle_census: epsilon must be positive");
}

void count(TriangleCensus& c, const OverlapTriple& t, double epsilon) {
  ++c.total;
  switch (classify_triangle(t, epsilon)) {
    case TriangleClass::equilateral: ++c.equilateral; break;
    case TriangleClass::isosceles: ++c.isosceles; break;
    case TriangleClass::violating: ++c.violating; break;
  }
  auto s = t;
  std::sort(s.begin(), s.end());
  c.worst_margin = std::max(c.worst_margin, s[1] - s[0]);
}

}  // namespace

TriangleCensus triangle_census(std::span<const OverlapTriple> triples, double epsilon) {
  require_epsilon(epsilon);
  TriangleCensus c;
  for (const auto& t : triples) count(c, t, epsilon);
  return c;
}

TriangleCensus triangle_census(std::span<const OverlapMatrix> samples, double epsilon) {
  require_epsilon(epsilon);
  TriangleCensus c;
  for (const auto& r : samples)
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = i + 1; j < r.size(); ++j)
        for (std::size_t k = j + 1; k < r.size(); ++k) count(c, {r(i, j), r(i, k), r(j, k)}, epsilon);
  return c;
}

TriangleCensus triangle_census(std::span<const std::array<ReplicaVector, 3>> triples,
                               double epsilon) {
  require_epsilon(epsilon);
  TriangleCensus c;
  std::size_t agree = 0;
  for (const auto& x : triples) {
    const OverlapTriple t{dot(x[0], x[1]), dot(x[0], x[2]), dot(x[1], x[2])};
    count(c, t, epsilon);
    const double d12 = squared_distance(x[0], x[1]);
    const double d13 = squared_distance(x[0], x[2]);
    const double d23 = squared_distance(x[1], x[2]);
    const bool norm_ok = d12 <= std::max(d13, d23) + 2.0 * epsilon &&
                         d13 <= std::max(d12, d23) + 2.0 * epsilon &&
                         d23 <= std::max(d12, d13) + 2.0 * epsilon;
    const bool overlap_ok = classify_triangle(t, epsilon) != TriangleClass::violating;
    if (norm_ok == overlap_ok) ++agree;
  }
  c.norm_form_agreement = agree;
  return c;
}

// ---------------------------------------------------------------------------
// Support and extension probes

Estimate support_probe(const MeasureSource& source, const ConstraintMatrix& a,
                       const Budget& budget, std::uint64_t seed, const RunContext& ctx) {
  if (a.size() < 2) throw InvalidInput("support_probe: A must be at least 2 x 2");
  budget.validate();
  std::vector<double> means(budget.realizations);
  parallel_for(budget.realizations, ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    RunningMean m;
    for (std::size_t t = 0; t < budget.tuples; ++t) {
      const auto pts = g->sample(a.size(), rng);
      m.add(matrix_approx(overlaps_of(*g, pts), a) ? 1.0 : 0.0);
    }
    means[r] = m.mean();
  });
  return estimate_from(means);
}

ExtensionReport extension_probe(const MeasureSource& source, const ConstraintMatrix& a,
                                const Budget& budget, std::uint64_t seed, const RunContext& ctx) {
  const std::size_t n = a.size();
  if (n < 2) throw InvalidInput("extension_probe: A must be at least 2 x 2");
  budget.validate();
  const double eps = a.epsilon();
  const double top = a_star(a);
  std::vector<double> support(budget.realizations), extension(budget.realizations),
      gamma(budget.realizations);
  parallel_for(budget.realizations, ctx.jobs, [&](std::size_t r) {
    auto g = source.realize(streams::realization(seed, r));
    Rng rng = make_rng(streams::replicas(seed, r));
    RunningMean s, e, q;
    for (std::size_t t = 0; t < budget.tuples; ++t) {
      const auto pts = g->sample(n + 1, rng);
      const OverlapMatrix R = overlaps_of(*g, pts);
      const bool in_support = matrix_approx(R.leading(n), a);
      bool extends = in_support;
      for (std::size_t l = 0; extends && l + 1 < n; ++l)
        extends = std::abs(R(l, n) - a(l, n - 1)) < eps;
      extends = extends && R(n - 1, n) < top + eps;
      s.add(in_support ? 1.0 : 0.0);
      e.add(extends ? 1.0 : 0.0);
      q.add(R(0, 1) >= top + eps ? 1.0 : 0.0);
    }
    support[r] = s.mean();
    extension[r] = e.mean();
    gamma[r] = q.mean();
  });

  ExtensionReport rep;
  rep.support = estimate_from(support);
  rep.extension = estimate_from(extension);
  rep.gamma = estimate_from(gamma);
  rep.a_star = top;
  rep.gap_condition = top + eps < source.q_star();
  rep.support_positive = rep.support.mean - ctx.z_threshold * rep.support.std_error > 0.0;
  if (!rep.gap_condition || !rep.support_positive) {
    rep.verdict = "not-applicable";
  } else if (!source.is_gg_reference()) {
    rep.verdict = "report";
  } else {
    const bool positive = rep.extension.mean - ctx.z_threshold * rep.extension.std_error > 0.0;
    rep.verdict = positive ? "pass" : "fail";
  }
  rep.metadata = {{"n", n},
                  {"epsilon", eps},
                  {"source", source.describe()},
                  {"realizations", budget.realizations},
                  {"tuples", budget.tuples},
                  {"seed", seed},
                  {"support_rule", "estimate exceeds z_threshold standard errors"},
                  {"z_threshold", ctx.z_threshold}};
  return rep;
}

// ---------------------------------------------------------------------------
// Barycenters

namespace {

double block_mean(const OverlapMatrix& g, std::span<const std::size_t> x,
                  std::span<const std::size_t> y) {
  double s = 0.0;
  for (auto i : x)
    for (auto j : y) s += g(i, j);
  return s / static_cast<double>(x.size() * y.size());
}

}  // namespace

BarycenterReport barycenter_diagnostic(const OverlapMatrix& gram,
                                       const std::array<std::vector<std::size_t>, 3>& groups,
                                       double a, double b, double c) {
  const std::size_t m = groups[0].size();
  if (m == 0 || groups[1].size() != m || groups[2].size() != m)
    throw InvalidInput("barycenter_diagnostic: the three groups must have the same size m >= 1");
  std::vector<bool> seen(gram.size(), false);
  for (const auto& grp : groups)
    for (auto i : grp) {
      if (i >= gram.size()) throw InvalidInput("barycenter_diagnostic: index out of range");
      if (seen[i]) throw InvalidInput("barycenter_diagnostic: groups must be disjoint");
      seen[i] = true;
    }
  const double q = gram.q_star();
  BarycenterReport rep;
  rep.m = m;
  rep.q_star = q;
  rep.a = a;
  rep.b = b;
  rep.c = c;
  for (std::size_t j = 0; j < 3; ++j) rep.norms[j] = block_mean(gram, groups[j], groups[j]);
  rep.p12 = block_mean(gram, groups[0], groups[1]);
  rep.p13 = block_mean(gram, groups[0], groups[2]);
  rep.p23 = block_mean(gram, groups[1], groups[2]);
  const double md = static_cast<double>(m);
  rep.norm_bound = (md * q + md * (md - 1.0) * c) / (md * md);
  rep.distance23 = rep.norms[1] + rep.norms[2] - 2.0 * rep.p23;
  rep.distance_bound = 2.0 * (q - c) / md;
  rep.gap = rep.p13 - rep.p12;
  rep.gap_bound = std::sqrt(2.0 * q * (q - c) / md);

  const double tol = kBarycenterTolerance;
  bool cond = true;
  for (std::size_t i = 0; i < gram.size(); ++i)
    for (std::size_t j = 0; j < gram.size(); ++j)
      if (i != j && seen[i] && seen[j] && gram(i, j) > c + tol) cond = false;
  auto block_is = [&](const auto& x, const auto& y, double v) {
    for (auto i : x)
      for (auto j : y)
        if (std::abs(gram(i, j) - v) > tol) return false;
    return true;
  };
  cond = cond && block_is(groups[0], groups[1], a) && block_is(groups[0], groups[2], b) &&
         block_is(groups[1], groups[2], c);
  rep.conditions_hold = cond;
  rep.norms_ok = std::all_of(rep.norms.begin(), rep.norms.end(),
                             [&](double x) { return x <= rep.norm_bound + tol; });
  rep.distance_ok = rep.distance23 <= rep.distance_bound + tol;
  rep.gap_ok = rep.gap <= rep.gap_bound + tol;
  rep.realizable = gram.is_positive_semidefinite();
  return rep;
}

BarycenterReport barycenter_diagnostic(std::span<const ReplicaVector> replicas,
                                       const std::array<std::vector<std::size_t>, 3>& groups,
                                       double a, double b, double c) {
  return barycenter_diagnostic(overlap_matrix(replicas), groups, a, b, c);
}

OverlapMatrix pattern_gram(double a, double b, double c, double q_star, std::size_t m,
                           double within) {
  if (m == 0) throw InvalidInput("pattern_gram: m must be >= 1");
  const std::size_t n = 3 * m;
  std::vector<double> e(n * n);
  const double cross[3][3] = {{within, a, b}, {a, within, c}, {b, c, within}};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) e[i * n + j] = i == j ? q_star : cross[i / m][j / m];
  return OverlapMatrix(n, std::move(e), q_star);
}

std::array<std::vector<std::size_t>, 3> contiguous_groups(std::size_t m) {
  std::array<std::vector<std::size_t>, 3> g;
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < m; ++i) g[j].push_back(j * m + i);
  return g;
}

std::vector<ReplicaVector> realize_gram(const OverlapMatrix& gram) {
  if (!gram.is_positive_semidefinite())
    throw InvalidInput("realize_gram: matrix is not positive semidefinite");
  const auto n = static_cast<Eigen::Index>(gram.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      g(i, j) = gram(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd x = es.eigenvectors() * root.asDiagonal();
  std::vector<ReplicaVector> out(gram.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& v = out[static_cast<std::size_t>(i)].coords;
    v.resize(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = x(i, k);
  }
  return out;
}

std::optional<std::size_t> smallest_non_psd_m(double a, double b, double c, double q_star,
                                              std::size_t m_max) {
  for (std::size_t m = 1; m <= m_max; ++m)
    if (!pattern_gram(a, b, c, q_star, m, c).is_positive_semidefinite()) return m;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Trees

UltrametricTree build_ultrametric_tree(const OverlapMatrix& r) {
  const std::size_t n = r.size();
  if (n == 0) throw InvalidInput("build_ultrametric_tree: empty matrix");
  UltrametricTree tree;
  tree.leaves = n;
  tree.q_star = r.q_star();
  std::vector<std::size_t> id(n);
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    id[i] = i;
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = r.q_star() - r(i, j);
  }
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j)
        if (active[j] && d[i * n + j] < best) {
          best = d[i * n + j];
          bi = i;
          bj = j;
        }
    }
    tree.merges.push_back({id[bi], id[bj], best, size[bi] + size[bj]});
    for (std::size_t k = 0; k < n; ++k) {
      const double v = std::min(d[bi * n + k], d[bj * n + k]);
      d[bi * n + k] = v;
      d[k * n + bi] = v;
    }
    active[bj] = false;
    id[bi] = n + step;
    size[bi] += size[bj];
  }
  return tree;
}

namespace {

// Leaves below every node of the tree.
std::vector<std::vector<std::size_t>> members(const UltrametricTree& t) {
  std::vector<std::vector<std::size_t>> out(t.leaves + t.merges.size());
  for (std::size_t i = 0; i < t.leaves; ++i) out[i] = {i};
  for (std::size_t k = 0; k < t.merges.size(); ++k) {
    auto& v = out[t.leaves + k];
    v = out[t.merges[k].left];
    v.insert(v.end(), out[t.merges[k].right].begin(), out[t.merges[k].right].end());
  }
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

OverlapMatrix UltrametricTree::cophenetic() const {
  std::vector<double> e(leaves * leaves, q_star);
  const auto mem = members(*this);
  for (const auto& mg : merges)
    for (auto i : mem[mg.left])
      for (auto j : mem[mg.right]) {
        e[i * leaves + j] = q_star - mg.height;
        e[j * leaves + i] = q_star - mg.height;
      }
  return OverlapMatrix(leaves, std::move(e), q_star);
}

std::string UltrametricTree::newick() const {
  std::vector<std::string> text(leaves + merges.size());
  std::vector<double> height(leaves + merges.size(), 0.0);
  for (std::size_t i = 0; i < leaves; ++i) text[i] = std::to_string(i + 1);
  for (std::size_t k = 0; k < merges.size(); ++k) {
    const auto& mg = merges[k];
    height[leaves + k] = mg.height;
    text[leaves + k] = "(" + text[mg.left] + ":" + fmt(mg.height - height[mg.left]) + "," +
                       text[mg.right] + ":" + fmt(mg.height - height[mg.right]) + ")";
  }
  return text.back() + ";";
}

std::vector<double> UltrametricTree::distinct_heights(double epsilon) const {
  std::vector<double> h;
  for (const auto& mg : merges) h.push_back(mg.height);
  std::sort(h.begin(), h.end());
  std::vector<double> out;
  for (double x : h)
    if (out.empty() || x - out.back() >= epsilon) out.push_back(x);
  return out;
}

double cophenetic_error(const UltrametricTree& tree, const OverlapMatrix& r) {
  const auto c = tree.cophenetic();
  if (c.size() != r.size()) throw InvalidInput("cophenetic_error: size mismatch");
  double err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) err = std::max(err, std::abs(c(i, j) - r(i, j)));
  return err;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TriangleCensus& c) {
  j = {{"total", c.total},
       {"equilateral", c.equilateral},
       {"isosceles", c.isosceles},
       {"violating", c.violating},
       {"worst_margin", json_number(c.worst_margin)}};
  if (c.norm_form_agreement) j["norm_form_agreement"] = *c.norm_form_agreement;
}

void to_json(nlohmann::json& j, const ExtensionReport& r) {
  j = {{"name", "extension"},
       {"support", r.support},
       {"support_positive", r.support_positive},
       {"a_star", r.a_star},
       {"gap_condition", r.gap_condition},
       {"extension", r.extension},
       {"gamma", r.gamma},
       {"verdict", r.verdict},
       {"metadata", r.metadata}};
}

void to_json(nlohmann::json& j, const BarycenterReport& r) {
  j = {{"m", r.m},
       {"q_star", r.q_star},
       {"a", r.a},
       {"b", r.b},
       {"c", r.c},
       {"norms", r.norms},
       {"p12", r.p12},
       {"p13", r.p13},
       {"p23", r.p23},
       {"norm_bound", r.norm_bound},
       {"distance23", r.distance23},
       {"distance_bound", r.distance_bound},
       {"gap", r.gap},
       {"gap_bound", r.gap_bound},
       {"conditions_hold", r.conditions_hold},
       {"norms_ok", r.norms_ok},
       {"distance_ok", r.distance_ok},
       {"gap_ok", r.gap_ok},
       {"realizable", r.realizable}};
}

}  // namespace gglab

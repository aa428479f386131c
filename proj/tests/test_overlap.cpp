#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "gglab/cascade.hpp"
#include "gglab/overlap.hpp"
#include "gglab/rng.hpp"

using namespace gglab;

namespace {

ReplicaVector vec(std::vector<double> c) { return ReplicaVector{std::move(c)}; }

OverlapMatrix off_matrix(std::size_t n, double off) { return OverlapMatrix::constant(n, off, 1.0); }

}  // namespace

TEST_CASE("overlap_matrix of identical and orthogonal unit vectors") {
  const std::vector<ReplicaVector> same{vec({1, 0, 0}), vec({1, 0, 0})};
  const auto r = overlap_matrix(same);
  CHECK(r.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(r(i, j) == 1.0);

  const std::vector<ReplicaVector> ortho{vec({1, 0}), vec({0, 1})};
  const auto o = overlap_matrix(ortho);
  CHECK(o(0, 1) == 0.0);
  CHECK(o(1, 0) == 0.0);
  CHECK(o(0, 0) == 1.0);
}

TEST_CASE("overlap_matrix rejects mismatched dimensions and empty input") {
  const std::vector<ReplicaVector> bad{vec({1, 0}), vec({1, 0, 0})};
  CHECK_THROWS_AS(overlap_matrix(bad), InvalidInput);
  CHECK_THROWS_AS(overlap_matrix(std::vector<ReplicaVector>{}), InvalidInput);
}

TEST_CASE("cascade replicas sharing an atom have overlap q* and others q0") {
  CascadeConfig cfg{{0.5}, {0.2, 0.8}, 64, 0};
  auto g = build_cascade(cfg, 11);
  Rng rng = make_rng(5);
  int shared_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = g.sample(3, rng);
    const auto emb = g.embed(pts);
    const auto r = overlap_matrix(emb);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) {
        const double expect = pts[i] == pts[j] ? 0.8 : 0.2;
        if (pts[i] == pts[j]) ++shared_seen;
        CHECK(std::abs(r(i, j) - expect) < 1e-9);
        // oracle: explicit coordinates
        double d = 0.0;
        for (std::size_t k = 0; k < emb[i].dimension(); ++k) d += emb[i].coords[k] * emb[j].coords[k];
        CHECK(std::abs(r(i, j) - d) < 1e-12);
      }
  }
  CHECK(shared_seen > 0);
}

TEST_CASE("overlap_matrix is symmetric and PSD on random inputs") {
  Rng rng = make_rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 8);
    const std::size_t dim = 1 + uniform_index(rng, 6);
    std::vector<ReplicaVector> reps(n);
    for (auto& v : reps) {
      v.coords.resize(dim);
      for (auto& x : v.coords) x = 2.0 * uniform01(rng) - 1.0;
    }
    const auto r = overlap_matrix(reps);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK(r(i, j) == r(j, i));
    CHECK(r.is_positive_semidefinite());
    double maxdiag = 1.0;
    for (std::size_t i = 0; i < n; ++i) maxdiag = std::max(maxdiag, r(i, i));
    CHECK(smallest_eigenvalue(r.entries(), n) >= -1e-9 * maxdiag);
  }
}

TEST_CASE("matrix_approx uses the open interval") {
  const double eps = 0.125;  // exactly representable
  const auto a = ConstraintMatrix::uniform(3, 0.5, 1.0, eps);
  CHECK(matrix_approx(off_matrix(3, 0.5), a));

  auto far = off_matrix(3, 0.5);
  far.set(0, 2, 0.5 + 2 * eps);
  CHECK_FALSE(matrix_approx(far, a));

  auto edge = off_matrix(3, 0.5);
  edge.set(1, 2, 0.5 + eps);
  CHECK_FALSE(matrix_approx(edge, a));

  auto inside = off_matrix(3, 0.5);
  inside.set(1, 2, 0.5 + eps / 2);
  CHECK(matrix_approx(inside, a));

  // the diagonal is never compared
  const OverlapMatrix diag_off(2, {0.3, 0.5, 0.5, 0.3}, 0.3);
  CHECK(matrix_approx(diag_off, ConstraintMatrix::uniform(2, 0.5, 1.0, eps)));

  CHECK_THROWS_AS(matrix_approx(off_matrix(2, 0.5), a), InvalidInput);
}

TEST_CASE("set keeps the matrix symmetric") {
  auto m = off_matrix(3, 0.1);
  m.set(0, 2, 0.4);
  CHECK(m(2, 0) == 0.4);
}

TEST_CASE("ConstraintMatrix validation") {
  CHECK_THROWS_AS(ConstraintMatrix(2, {1.0, 0.5, 0.4, 1.0}, 1.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(ConstraintMatrix(2, {0.9, 0.5, 0.5, 1.0}, 1.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(ConstraintMatrix(2, {1.0, 0.5, 0.5, 1.0}, 1.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(ConstraintMatrix(2, {1.0, 2.0, 2.0, 1.0}, 1.0, 0.1), InvalidInput);  // not PSD
}

TEST_CASE("a_star picks the largest last-column entry") {
  const ConstraintMatrix a3(3, {1.0, 0.1, 0.2, 0.1, 1.0, 0.5, 0.2, 0.5, 1.0}, 1.0, 0.05);
  CHECK(a_star(a3) == 0.5);
  CHECK(a_star(ConstraintMatrix::uniform(2, 0.3, 1.0, 0.05)) == 0.3);
  const ConstraintMatrix tie(3, {1.0, 0.1, 0.4, 0.1, 1.0, 0.4, 0.4, 0.4, 1.0}, 1.0, 0.05);
  CHECK(a_star(tie) == 0.4);
  CHECK_THROWS_AS(a_star(ConstraintMatrix::uniform(1, 0.0, 1.0, 0.05)), InvalidInput);
}

TEST_CASE("ultrametric_indicator cases") {
  CHECK(ultrametric_indicator(0.5, 0.2, 0.2) == 1);
  CHECK(ultrametric_indicator(0.2, 0.5, 0.5) == 0);
  for (double q : {-0.3, 0.0, 0.4, 1.0}) CHECK(ultrametric_indicator(q, q, q) == 1);
}

TEST_CASE("ultrametric_indicator symmetry under swapping replicas 1 and 2") {
  Rng rng = make_rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = uniform01(rng), b = uniform01(rng), c = uniform01(rng);
    CHECK(ultrametric_indicator(a, b, c) == ultrametric_indicator(a, c, b));
  }
}

TEST_CASE("all three rotations hold iff the two smallest overlaps are equal") {
  constexpr int steps = 16;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j)
      for (int k = 0; k <= steps; ++k) {
        const double r12 = i / double(steps), r13 = j / double(steps), r23 = k / double(steps);
        const bool all = ultrametric_indicator(r12, r13, r23) && ultrametric_indicator(r13, r12, r23) &&
                         ultrametric_indicator(r23, r12, r13);
        std::array<int, 3> s{i, j, k};
        std::sort(s.begin(), s.end());
        CHECK(all == (s[0] == s[1]));
      }
}

TEST_CASE("JSON round trip and CSV export") {
  const OverlapMatrix m(2, {0.9, 0.25, 0.25, 0.9}, 0.9);
  nlohmann::json j = m;
  CHECK(j.at("n") == 2);
  const auto back = j.get<OverlapMatrix>();
  CHECK(back(0, 1) == 0.25);
  CHECK(back.q_star() == 0.9);

  const auto a = ConstraintMatrix::uniform(3, 0.5, 1.0, 0.01);
  nlohmann::json ja = a;
  CHECK(ja.at("epsilon") == 0.01);
  CHECK(ja.get<ConstraintMatrix>()(1, 2) == 0.5);

  std::ostringstream os;
  const std::vector<OverlapMatrix> samples{m};
  write_overlap_csv(os, samples);
  CHECK(os.str() == "sample,l,l2,overlap\n0,1,2,0.25\n");
}

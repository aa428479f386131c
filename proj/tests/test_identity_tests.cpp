#include <doctest.h>

#include <cmath>
#include <memory>

#include "gglab/cascade.hpp"
#include "gglab/identity_tests.hpp"
#include "gglab/spin_model.hpp"

using namespace gglab;

namespace {

Budget small_budget(std::size_t realizations = 600, std::size_t tuples = 16) {
  Budget b;
  b.realizations = realizations;
  b.tuples = tuples;
  b.mu_pairs = 16;
  b.inner_m = 32;
  return b;
}

std::shared_ptr<MeasureSource> sk_source() {
  SpinSourceConfig cfg;
  cfg.model = sk_model(6, 1.0);
  cfg.enumerated = true;
  return std::make_shared<SpinSource>(cfg);
}

}  // namespace

TEST_CASE("f = 1 passes for every source") {
  const std::vector<std::shared_ptr<MeasureSource>> sources{
      std::make_shared<DiracSource>(0.8),
      std::make_shared<CascadeSource>(CascadeConfig{{0.5}, {0.2, 0.8}}),
      std::make_shared<CascadeSource>(CascadeConfig{{0.3, 0.7}, {0.1, 0.5, 0.9}}),
      sk_source()};
  const auto psi = ScalarFunction::threshold(0.5);
  std::uint64_t seed = 100;
  for (const auto& s : sources) {
    const auto r = gg_identity_test(*s, OverlapFunction::constant(1.0), psi, 2, small_budget(), ++seed);
    MESSAGE(s->describe() << ": z = " << r.z_score);
    CHECK(std::abs(r.z_score) < 3.0);
    CHECK(r.difference.mean == doctest::Approx(r.lhs.mean - r.rhs.mean));
    CHECK(r.asserted == s->is_gg_reference());
  }
}

TEST_CASE("one-level cascade passes the identity at n = 3") {
  CascadeSource source(CascadeConfig{{0.5}, {0.2, 0.8}});
  const auto f = OverlapFunction::pair(0, 1, ScalarFunction::threshold(0.5));
  const auto r = gg_identity_test(source, f, ScalarFunction::threshold(0.5), 3, small_budget(2000, 32), 7);
  MESSAGE("lhs " << r.lhs.mean << " rhs " << r.rhs.mean << " z " << r.z_score);
  CHECK(r.pass);
  CHECK(r.verdict() == "pass");
}

TEST_CASE("single atom: both sides equal exactly") {
  DiracSource source(0.6);
  const auto f = OverlapFunction::pair(0, 2, ScalarFunction::polynomial({0.5, 1.0}));
  const auto psi = ScalarFunction::polynomial({0.1, 0.0, 2.0});
  const auto r = gg_identity_test(source, f, psi, 3, small_budget(50, 4), 1);
  const double expect = (0.5 + 0.6) * (0.1 + 2.0 * 0.36);
  CHECK(r.lhs.mean == doctest::Approx(expect));
  CHECK(r.lhs.mean == r.rhs.mean);
  CHECK(r.difference.mean == 0.0);
  CHECK(r.difference.std_error == 0.0);
  CHECK(r.pass);
}

TEST_CASE("doubling the budget shrinks the standard error by about sqrt 2") {
  CascadeSource source(CascadeConfig{{0.5}, {0.2, 0.8}});
  const auto f = OverlapFunction::pair(0, 1, ScalarFunction::threshold(0.5));
  const auto psi = ScalarFunction::threshold(0.5);
  Budget b = small_budget(1000, 16);
  b.bootstrap = 2000;
  const auto one = gg_identity_test(source, f, psi, 2, b, 55);
  const auto two = gg_identity_test(source, f, psi, 2, b.scaled(2.0), 55);
  const double ratio = one.difference.std_error / two.difference.std_error;
  MESSAGE("SE ratio " << ratio);
  CHECK(ratio >= 1.25);
  CHECK(ratio <= 1.6);
}

TEST_CASE("invalid requests are rejected") {
  DiracSource source(1.0);
  const auto f = OverlapFunction::constant(1.0);
  const auto psi = ScalarFunction::constant(1.0);
  Budget tiny = small_budget();
  tiny.realizations = 1;
  CHECK_THROWS_WITH_AS(gg_identity_test(source, f, psi, 2, tiny, 1),
                       doctest::Contains("budget too small"), InvalidInput);
  CHECK_THROWS_AS(gg_identity_test(source, f, psi, 1, small_budget(), 1), InvalidInput);
  // f refers to replica 4 but only 3 exist
  CHECK_THROWS_AS(gg_identity_test(source, OverlapFunction::pair(0, 3, psi), psi, 3, small_budget(), 1),
                  InvalidInput);
}

TEST_CASE("mean_overlap_function on a single atom") {
  DiracSource source(0.5);
  const auto f = OverlapFunction::pair(0, 1, ScalarFunction::polynomial({0.0, 2.0}));
  const auto e = mean_overlap_function(source, f, 2, small_budget(20, 2), 3);
  CHECK(e.mean == 1.0);
  CHECK(e.std_error == 0.0);
}

TEST_CASE("mixture law on a single atom") {
  DiracSource source(0.9);
  const auto rep = mixture_law_check(source, 3, 0, small_budget(40, 4), 9);
  REQUIRE(rep.patterns.size() == 1);
  REQUIRE(rep.patterns[0].cells.size() == 1);
  CHECK(rep.patterns[0].cells[0].value == 0.9);
  CHECK(rep.patterns[0].cells[0].empirical == 1.0);
  CHECK(rep.patterns[0].cells[0].mixture == 1.0);
  CHECK(rep.patterns[0].tv == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("mixture law on a one-level cascade at n = 2") {
  const CascadeConfig cfg{{0.5}, {0.2, 0.8}};
  CascadeSource source(cfg);
  const auto law = exact_overlap_law(cfg);
  const auto rep = mixture_law_check(source, 2, 0, small_budget(3000, 16), 21);
  CHECK(rep.pass);
  int checked = 0;
  for (const auto& p : rep.patterns) {
    REQUIRE(p.pattern.size() == 1);
    CHECK_FALSE(p.flagged);
    for (const auto& c : p.cells) {
      if (c.value != 0.8) continue;
      // conditional mass at q*: (1/2) mu(q*) + (1/2) [R12 = q*]
      const double oracle = 0.5 * law.mass_at(0.8) + (p.pattern[0] == 0.8 ? 0.5 : 0.0);
      MESSAGE("R12 = " << p.pattern[0] << ": " << c.empirical << " vs " << oracle << " (se "
                       << c.std_error << ")");
      CHECK(std::abs(c.empirical - oracle) < 3.0 * c.std_error + law.truncation_bias);
      ++checked;
    }
  }
  CHECK(checked == 2);
  nlohmann::json j = rep;
  CHECK(j.at("patterns").size() == rep.patterns.size());
}

TEST_CASE("rare patterns are flagged, not failed") {
  auto source = sk_source();
  const auto rep = mixture_law_check(*source, 3, 0, small_budget(20, 2), 4);
  bool any_flagged = false;
  for (const auto& p : rep.patterns) any_flagged = any_flagged || p.flagged;
  CHECK(any_flagged);
  CHECK_FALSE(rep.asserted);
}

TEST_CASE("binned mixture law") {
  CascadeSource source(CascadeConfig{{0.3, 0.7}, {0.1, 0.5, 0.9}});
  const auto rep = mixture_law_check(source, 2, 5, small_budget(1500, 16), 13);
  CHECK(rep.bins == 5);
  CHECK(rep.pass);
}

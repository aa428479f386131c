#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "gglab/statistics.hpp"

namespace gglab {

/// Monte Carlo budget of one statistical test. E is approximated over
/// `realizations` independent draws of G and <.> over `tuples` replica tuples
/// per draw; one-overlap means such as E<psi(R12)> come from an independent
/// block of `mu_realizations` x `mu_pairs`.
struct Budget {
  std::size_t realizations = 2000;
  std::size_t tuples = 32;
  std::size_t mu_realizations = 0;  // 0: same as realizations
  std::size_t mu_pairs = 32;
  std::size_t bootstrap = 200;
  std::size_t inner_m = 256;  // inner Monte Carlo draws for non-atomic sources

  std::size_t mu_block() const noexcept { return mu_realizations ? mu_realizations : realizations; }
  Budget scaled(double factor) const;
  /// Throws InvalidInput when the budget cannot support a bootstrap.
  void validate() const;
};

struct RunContext {
  double z_threshold = 3.0;
  unsigned jobs = 1;
};

struct TestReport {
  std::string name;
  Estimate lhs;
  Estimate rhs;
  Estimate difference;  // lhs - rhs
  double z_score = 0.0;
  bool pass = false;
  /// False for diagnostic-only runs (e.g. finite-N spin models), where the
  /// verdict is reported but never counted as a failure.
  bool asserted = true;
  nlohmann::json metadata = nlohmann::json::object();

  std::string verdict() const { return asserted ? (pass ? "pass" : "fail") : "report"; }
};

/// Fills z_score and pass from the difference estimate.
void finalize(TestReport& report, const RunContext& ctx);

void to_json(nlohmann::json& j, const TestReport& r);
void from_json(const nlohmann::json& j, TestReport& r);

/// JSON number, or the strings "inf" / "-inf" / "nan".
nlohmann::json json_number(double x);
double number_from_json(const nlohmann::json& j);

}  // namespace gglab

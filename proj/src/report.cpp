#include "gglab/report.hpp"

#include <cmath>
#include <limits>

#include "gglab/overlap.hpp"

namespace gglab {

Budget Budget::scaled(double factor) const {
  if (!(factor > 0.0)) throw InvalidInput("budget scale must be positive");
  auto scale = [factor](std::size_t v) {
    return v == 0 ? std::size_t{0}
                  : std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(v * factor)));
  };
  Budget b = *this;
  b.realizations = scale(realizations);
  b.mu_realizations = scale(mu_realizations);
  return b;
}

void Budget::validate() const {
  if (realizations < 2 || mu_block() < 2)
    throw InvalidInput("budget too small for bootstrap: need at least 2 realizations per block");
  if (bootstrap < 2) throw InvalidInput("budget too small for bootstrap: need at least 2 resamples");
  if (tuples < 1 || mu_pairs < 1 || inner_m < 1)
    throw InvalidInput("budget: tuples, mu_pairs and inner_m must be positive");
}

void finalize(TestReport& report, const RunContext& ctx) {
  report.z_score = z_score(report.difference.mean, report.difference.std_error);
  report.pass = std::abs(report.z_score) < ctx.z_threshold;
}

nlohmann::json json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

void to_json(nlohmann::json& j, const TestReport& r) {
  j = {{"name", r.name},
       {"lhs", r.lhs},
       {"rhs", r.rhs},
       {"difference", r.difference},
       {"z_score", json_number(r.z_score)},
       {"pass", r.pass},
       {"asserted", r.asserted},
       {"verdict", r.verdict()},
       {"metadata", r.metadata}};
}

void from_json(const nlohmann::json& j, TestReport& r) {
  r.name = j.at("name").get<std::string>();
  r.lhs = j.at("lhs").get<Estimate>();
  r.rhs = j.at("rhs").get<Estimate>();
  r.difference = j.at("difference").get<Estimate>();
  r.z_score = number_from_json(j.at("z_score"));
  r.pass = j.at("pass").get<bool>();
  r.asserted = j.value("asserted", true);
  r.metadata = j.value("metadata", nlohmann::json::object());
}

}  // namespace gglab

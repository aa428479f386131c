#include "gglab/function_spec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gglab {

ScalarFunction ScalarFunction::constant(double value) { return {Kind::constant, {value}}; }

ScalarFunction ScalarFunction::threshold(double c, double scale) {
  return {Kind::threshold, {c, scale}};
}

ScalarFunction ScalarFunction::window(double center, double half_width, double scale) {
  if (!(half_width > 0.0)) throw InvalidInput("window: half_width must be > 0");
  return {Kind::window, {center, half_width, scale}};
}

ScalarFunction ScalarFunction::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) coeffs.push_back(0.0);
  return {Kind::polynomial, std::move(coeffs)};
}

double ScalarFunction::operator()(double x) const noexcept {
  switch (kind_) {
    case Kind::constant:
      return params_[0];
    case Kind::threshold:
      return x >= params_[0] ? params_[1] : 0.0;
    case Kind::window:
      return std::abs(x - params_[0]) < params_[1] ? params_[2] : 0.0;
    case Kind::polynomial: {
      double acc = 0.0;
      for (auto it = params_.rbegin(); it != params_.rend(); ++it) acc = acc * x + *it;
      return acc;
    }
  }
  return 0.0;
}

double ScalarFunction::bound(double radius) const noexcept {
  switch (kind_) {
    case Kind::constant:
      return std::abs(params_[0]);
    case Kind::threshold:
      return std::abs(params_[1]);
    case Kind::window:
      return std::abs(params_[2]);
    case Kind::polynomial: {
      double acc = 0.0;
      double power = 1.0;
      for (double c : params_) {
        acc += std::abs(c) * power;
        power *= std::abs(radius);
      }
      return acc;
    }
  }
  return 0.0;
}

ScalarFunction ScalarFunction::scaled(double factor) const {
  ScalarFunction out = *this;
  switch (kind_) {
    case Kind::constant:
      out.params_[0] *= factor;
      break;
    case Kind::threshold:
      out.params_[1] *= factor;
      break;
    case Kind::window:
      out.params_[2] *= factor;
      break;
    case Kind::polynomial:
      for (double& c : out.params_) c *= factor;
      break;
  }
  return out;
}

bool ScalarFunction::is_zero() const noexcept { return bound(1.0) == 0.0; }

OverlapFunction::OverlapFunction(double scale, std::vector<Factor> factors)
    : scale_(scale), factors_(std::move(factors)) {
  for (const auto& f : factors_)
    if (f.i == f.j) throw InvalidInput("OverlapFunction: factor must reference two distinct replicas");
}

OverlapFunction OverlapFunction::pair(std::size_t i, std::size_t j, ScalarFunction fn) {
  return OverlapFunction(1.0, {Factor{i, j, std::move(fn)}});
}

double OverlapFunction::operator()(const OverlapMatrix& r) const {
  double acc = scale_;
  for (const auto& f : factors_) {
    if (f.i >= r.size() || f.j >= r.size())
      throw InvalidInput("OverlapFunction: pair outside the overlap matrix");
    acc *= f.fn(r(f.i, f.j));
  }
  return acc;
}

std::size_t OverlapFunction::min_replicas() const noexcept {
  std::size_t n = 1;
  for (const auto& f : factors_) n = std::max({n, f.i + 1, f.j + 1});
  return n;
}

double OverlapFunction::bound(double radius) const noexcept {
  double acc = std::abs(scale_);
  for (const auto& f : factors_) acc *= f.fn.bound(radius);
  return acc;
}

double WeightedOverlapFunction::operator()(const OverlapMatrix& r,
                                           std::span<const double> w) const {
  double acc = base_(r);
  for (const auto& f : weights_) {
    if (f.cell >= w.size()) throw InvalidInput("WeightedOverlapFunction: cell out of range");
    acc *= f.fn(w[f.cell]);
  }
  return acc;
}

void to_json(nlohmann::json& j, const ScalarFunction& f) {
  const auto& p = f.params();
  switch (f.kind()) {
    case ScalarFunction::Kind::constant:
      j = {{"kind", "const"}, {"value", p[0]}};
      break;
    case ScalarFunction::Kind::threshold:
      j = {{"kind", "ge"}, {"c", p[0]}, {"scale", p[1]}};
      break;
    case ScalarFunction::Kind::window:
      j = {{"kind", "window"}, {"center", p[0]}, {"half_width", p[1]}, {"scale", p[2]}};
      break;
    case ScalarFunction::Kind::polynomial:
      j = {{"kind", "poly"}, {"coeffs", p}};
      break;
  }
}

void from_json(const nlohmann::json& j, ScalarFunction& f) {
  const auto kind = j.at("kind").get<std::string>();
  const double scale = j.value("scale", 1.0);
  if (kind == "const") {
    f = ScalarFunction::constant(j.at("value").get<double>());
  } else if (kind == "ge") {
    f = ScalarFunction::threshold(j.at("c").get<double>(), scale);
  } else if (kind == "window") {
    f = ScalarFunction::window(j.at("center").get<double>(), j.at("half_width").get<double>(),
                               scale);
  } else if (kind == "poly") {
    f = ScalarFunction::polynomial(j.at("coeffs").get<std::vector<double>>());
  } else {
    throw InvalidInput("unknown function kind '" + kind + "' (expected const, ge, window, poly)");
  }
}

void to_json(nlohmann::json& j, const OverlapFunction& f) {
  auto factors = nlohmann::json::array();
  for (const auto& x : f.factors())
    factors.push_back({{"pair", {x.i + 1, x.j + 1}}, {"fn", x.fn}});
  j = {{"scale", f.scale()}, {"factors", factors}};
}

void from_json(const nlohmann::json& j, OverlapFunction& f) {
  std::vector<OverlapFunction::Factor> factors;
  if (j.contains("factors")) {
    for (const auto& x : j.at("factors")) {
      const auto pair = x.at("pair").get<std::vector<std::size_t>>();
      if (pair.size() != 2 || pair[0] < 1 || pair[1] < 1)
        throw InvalidInput("factor pair must be two 1-based replica labels");
      factors.push_back({pair[0] - 1, pair[1] - 1, x.at("fn").get<ScalarFunction>()});
    }
  }
  f = OverlapFunction(j.value("scale", 1.0), std::move(factors));
}

void to_json(nlohmann::json& j, const WeightedOverlapFunction& f) {
  auto weights = nlohmann::json::array();
  for (const auto& w : f.weight_factors()) weights.push_back({{"cell", w.cell + 1}, {"fn", w.fn}});
  j = {{"base", f.base()}, {"weights", weights}};
}

void from_json(const nlohmann::json& j, WeightedOverlapFunction& f) {
  OverlapFunction base = j.contains("base") ? j.at("base").get<OverlapFunction>() : OverlapFunction();
  std::vector<WeightedOverlapFunction::WeightFactor> weights;
  if (j.contains("weights")) {
    for (const auto& w : j.at("weights")) {
      const auto cell = w.at("cell").get<std::size_t>();
      if (cell < 1) throw InvalidInput("weight cell labels are 1-based");
      weights.push_back({cell - 1, w.at("fn").get<ScalarFunction>()});
    }
  }
  f = WeightedOverlapFunction(std::move(base), std::move(weights));
}

}  // namespace gglab

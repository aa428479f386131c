#include "gglab/statistics.hpp"

#include <cmath>
#include <limits>

#include "gglab/overlap.hpp"
#include "gglab/rng.hpp"

namespace gglab {

Estimate merge(const Estimate& a, const Estimate& b) {
  if (a.n_samples == 0) return b;
  if (b.n_samples == 0) return a;
  const double na = static_cast<double>(a.n_samples);
  const double nb = static_cast<double>(b.n_samples);
  const double n = na + nb;
  Estimate out;
  out.mean = (na * a.mean + nb * b.mean) / n;
  out.std_error = std::sqrt(na * na * a.std_error * a.std_error +
                            nb * nb * b.std_error * b.std_error) / n;
  out.n_samples = a.n_samples + b.n_samples;
  return out;
}

Estimate estimate_from(std::span<const double> values) {
  RunningMean acc;
  for (double v : values) acc.add(v);
  Estimate e;
  e.mean = acc.mean();
  e.n_samples = acc.count();
  e.std_error = acc.count() > 1 ? std::sqrt(acc.variance() / static_cast<double>(acc.count())) : 0.0;
  return e;
}

std::vector<double> Block::column_means() const {
  std::vector<RunningMean> acc(cols_);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols_; ++c) acc[c].add(at(r, c));
  std::vector<double> out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = acc[c].mean();
  return out;
}

std::vector<double> Block::column_means(std::span<const std::size_t> rows) const {
  std::vector<RunningMean> acc(cols_);
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < cols_; ++c) acc[c].add(at(r, c));
  std::vector<double> out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = acc[c].mean();
  return out;
}

std::vector<double> bootstrap_standard_errors(const Block& main, const Block& aux,
                                              std::span<const BlockStatistic> statistics,
                                              std::size_t resamples, std::uint64_t seed) {
  if (main.rows() < 2) throw InvalidInput("bootstrap: need at least 2 realizations");
  if (resamples < 2) throw InvalidInput("bootstrap: need at least 2 resamples");
  Rng rng = make_rng(seed);
  std::vector<RunningMean> acc(statistics.size());
  std::vector<std::size_t> main_rows(main.rows());
  std::vector<std::size_t> aux_rows(aux.rows());
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& r : main_rows) r = uniform_index(rng, main.rows());
    for (auto& r : aux_rows) r = uniform_index(rng, aux.rows());
    const auto m = main.column_means(main_rows);
    const auto a = aux.column_means(aux_rows);
    for (std::size_t s = 0; s < statistics.size(); ++s) acc[s].add(statistics[s](m, a));
  }
  std::vector<double> out(statistics.size());
  for (std::size_t s = 0; s < statistics.size(); ++s) out[s] = std::sqrt(acc[s].variance());
  return out;
}

double z_score(double diff, double se) noexcept {
  if (se > 0.0) return diff / se;
  if (diff == 0.0) return 0.0;
  return diff > 0.0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
}

void to_json(nlohmann::json& j, const Estimate& e) {
  j = nlohmann::json{{"mean", e.mean}, {"std_error", e.std_error}, {"n_samples", e.n_samples}};
}

void from_json(const nlohmann::json& j, Estimate& e) {
  e.mean = j.at("mean").get<double>();
  e.std_error = j.at("std_error").get<double>();
  e.n_samples = j.at("n_samples").get<std::size_t>();
}

}  // namespace gglab

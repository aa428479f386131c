#include "gglab/measure.hpp"

#include <cmath>

namespace gglab {

OverlapMatrix overlaps_of(const Realization& g, std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n == 0) throw InvalidInput("overlaps_of: no points");
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = g.overlap(points[i], points[j]);
      e[i * n + j] = v;
      e[j * n + i] = v;
    }
  return OverlapMatrix(n, std::move(e), g.q_star());
}

ReplicaSample sample_replicas(Realization& g, std::size_t n, Rng& rng) {
  if (n < 1) throw InvalidInput("sample_replicas: n must be >= 1");
  ReplicaSample s;
  s.points = g.sample(n, rng);
  s.replicas = g.embed(s.points);
  s.overlaps = overlaps_of(g, s.points);
  return s;
}

double DiscreteLaw::mass_at(double value, double tol) const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::abs(values[i] - value) <= tol) m += masses[i];
  return m;
}

double DiscreteLaw::expectation(const ScalarFunction& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += masses[i] * f(values[i]);
  return acc;
}

namespace {

class DiracRealization final : public Realization {
 public:
  explicit DiracRealization(double q_star) : q_star_(q_star) {}

  double q_star() const override { return q_star_; }
  bool is_atomic() const override { return true; }

  std::vector<Point> sample(std::size_t n, Rng&) override { return std::vector<Point>(n); }
  double overlap(const Point&, const Point&) const override { return q_star_; }

  void for_each_class(std::span<const Point> replicas, Rng&, std::size_t,
                      const ClassVisitor& visit) override {
    const std::vector<double> overlaps(replicas.size(), q_star_);
    visit(1.0, overlaps);
  }

  std::vector<ReplicaVector> embed(std::span<const Point> points) override {
    return std::vector<ReplicaVector>(points.size(), ReplicaVector{{std::sqrt(q_star_)}});
  }

  nlohmann::json to_json() const override {
    return {{"type", "dirac"}, {"q_star", q_star_}, {"weights", {1.0}}};
  }

 private:
  double q_star_;
};

}  // namespace

DiracSource::DiracSource(double q_star) : q_star_(q_star) {
  if (!(q_star > 0.0 && q_star <= 1.0)) throw InvalidInput("dirac: q_star must be in (0, 1]");
}

std::unique_ptr<Realization> DiracSource::realize(std::uint64_t) const {
  return std::make_unique<DiracRealization>(q_star_);
}

std::string DiracSource::describe() const {
  return "dirac(q*=" + std::to_string(q_star_) + ")";
}

std::optional<DiscreteLaw> DiracSource::exact_overlap_law() const {
  return DiscreteLaw{{q_star_}, {1.0}, 0.0};
}

}  // namespace gglab

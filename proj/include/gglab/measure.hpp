#pragma once

// A MeasureSource yields random measures G (one Realization per seed); a
// Realization yields i.i.d. replicas from G and, for atomic G, exact inner
// averages <.>_ over a fresh replica sigma.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gglab/function_spec.hpp"
#include "gglab/overlap.hpp"
#include "gglab/rng.hpp"

namespace gglab {

/// Opaque handle of a replica inside one realization (a tree path, a spin
/// configuration, ...). Only the owning realization interprets it.
struct Point {
  std::vector<std::int32_t> key;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Receives one class of the measure: its G-mass and the overlaps
/// (sigma . sigma^l)_l shared by every sigma in the class.
using ClassVisitor = std::function<void(double mass, std::span<const double> overlaps)>;

class Realization {
 public:
  virtual ~Realization() = default;

  virtual double q_star() const = 0;
  /// Atomic realizations compute inner averages exactly.
  virtual bool is_atomic() const = 0;

  /// n replicas. Atomic realizations draw i.i.d. from G; Markov-chain
  /// realizations return the next state of n chains.
  virtual std::vector<Point> sample(std::size_t n, Rng& rng) = 0;
  virtual double overlap(const Point& a, const Point& b) const = 0;

  /// Splits G into classes on which sigma -> (sigma . replicas[l])_l is
  /// constant. Exact for atomic realizations; otherwise inner_m fresh draws
  /// of mass 1/inner_m each.
  virtual void for_each_class(std::span<const Point> replicas, Rng& rng, std::size_t inner_m,
                              const ClassVisitor& visit) = 0;

  /// Explicit coordinates for the given replicas (common dimension).
  virtual std::vector<ReplicaVector> embed(std::span<const Point> points) = 0;

  virtual nlohmann::json to_json() const { return nlohmann::json::object(); }
};

OverlapMatrix overlaps_of(const Realization& g, std::span<const Point> points);

struct ReplicaSample {
  std::vector<Point> points;
  std::vector<ReplicaVector> replicas;
  OverlapMatrix overlaps;
};

/// n replicas with their embeddings and overlap matrix.
ReplicaSample sample_replicas(Realization& g, std::size_t n, Rng& rng);

/// A finitely supported law on the real line.
struct DiscreteLaw {
  std::vector<double> values;
  std::vector<double> masses;
  /// Size of the deviation expected from finite truncation (0 when exact).
  double truncation_bias = 0.0;

  double mass_at(double value, double tol = 1e-12) const noexcept;
  double expectation(const ScalarFunction& f) const;
};

class MeasureSource {
 public:
  virtual ~MeasureSource() = default;

  virtual std::unique_ptr<Realization> realize(std::uint64_t seed) const = 0;
  virtual double q_star() const = 0;
  virtual bool is_atomic() const = 0;
  /// True when the source satisfies the Ghirlanda-Guerra identities exactly
  /// (up to truncation), so statistical identity checks are asserted.
  virtual bool is_gg_reference() const = 0;
  virtual std::string describe() const = 0;
  /// Law of R_{1,2} under E G^{x2} when known in closed form.
  virtual std::optional<DiscreteLaw> exact_overlap_law() const { return std::nullopt; }
};

/// The measure with one atom of weight 1 on the sphere of radius sqrt(q_star).
class DiracSource final : public MeasureSource {
 public:
  explicit DiracSource(double q_star);

  std::unique_ptr<Realization> realize(std::uint64_t seed) const override;
  double q_star() const override { return q_star_; }
  bool is_atomic() const override { return true; }
  bool is_gg_reference() const override { return true; }
  std::string describe() const override;
  std::optional<DiscreteLaw> exact_overlap_law() const override;

 private:
  double q_star_;
};

}  // namespace gglab

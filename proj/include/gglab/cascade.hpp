#pragma once

// Poisson-Dirichlet weighted cascades: atomic random measures whose atoms are
// the leaves of an r-level tree. Two leaves whose deepest common ancestor
// sits at depth j have overlap q_j, so every triangle is ultrametric.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "gglab/measure.hpp"

namespace gglab {

inline constexpr std::size_t kDefaultTruncation = 512;

struct PoissonDirichletWeights {
  double zeta = 0.5;
  std::vector<double> weights;  // decreasing, positive, sum 1

  std::size_t truncation() const noexcept { return weights.size(); }
};

/// The K largest points of a Poisson process with intensity x^{-zeta-1} dx,
/// normalized: w_k proportional to Gamma_k^{-1/zeta} where Gamma_k are the
/// arrival times of a unit-rate process.
PoissonDirichletWeights sample_pd_weights(double zeta, std::size_t k, Rng& rng);

/// Two-parameter PD(alpha, theta), theta > -alpha, by stick breaking: K
/// sticks plus the unbroken remainder split into K equal atoms, then ranked.
/// theta == 0 falls back to the one-parameter sampler above.
PoissonDirichletWeights sample_pd_weights(double alpha, double theta, std::size_t k, Rng& rng);

struct CascadeConfig {
  std::vector<double> zetas;     // zeta_1 < ... < zeta_r, in (0, 1)
  std::vector<double> overlaps;  // q_0 < q_1 < ... < q_r = q*, q_0 >= 0
  std::size_t truncation = kDefaultTruncation;
  /// 0 = embedding dimension grows with the replicas embedded; otherwise a
  /// hard cap that embed() enforces.
  std::size_t dimension = 0;

  std::size_t levels() const noexcept { return zetas.size(); }
  double q_star() const { return overlaps.back(); }
  /// Throws InvalidInput on non-monotone or out-of-range parameters.
  void validate() const;
};

/// One realized cascade. Child weights of a node are generated on first use
/// from a seed derived from (realization seed, node path), so the realized
/// measure does not depend on the order nodes are visited.
class CascadeMeasure final : public Realization {
 public:
  CascadeMeasure(CascadeConfig config, std::uint64_t seed);

  const CascadeConfig& config() const noexcept { return config_; }

  double q_star() const override { return config_.q_star(); }
  bool is_atomic() const override { return true; }
  std::vector<Point> sample(std::size_t n, Rng& rng) override;
  double overlap(const Point& a, const Point& b) const override;
  void for_each_class(std::span<const Point> replicas, Rng& rng, std::size_t inner_m,
                      const ClassVisitor& visit) override;
  std::vector<ReplicaVector> embed(std::span<const Point> points) override;
  nlohmann::json to_json() const override;

  /// Child weights below the node with the given path (root = empty path).
  const std::vector<double>& child_weights(std::span<const std::int32_t> path);
  /// G-mass of a leaf (product of weights along its path).
  double leaf_weight(const Point& leaf);
  /// Depth of the deepest common ancestor of two leaves (r when equal).
  std::size_t common_depth(const Point& a, const Point& b) const;

 private:
  struct Node {
    std::vector<double> weights;
    std::vector<double> cumulative;
  };
  const Node& node(std::span<const std::int32_t> path);
  void visit_subtree(std::vector<std::int32_t>& path, double mass,
                     std::span<const Point> replicas, std::vector<std::size_t>& inside,
                     std::vector<double>& overlaps, const ClassVisitor& visit);

  CascadeConfig config_;
  std::uint64_t seed_;
  std::map<std::vector<std::int32_t>, Node> nodes_;
};

CascadeMeasure build_cascade(const CascadeConfig& config, std::uint64_t seed);

class CascadeSource final : public MeasureSource {
 public:
  explicit CascadeSource(CascadeConfig config);

  const CascadeConfig& config() const noexcept { return config_; }
  std::unique_ptr<Realization> realize(std::uint64_t seed) const override;
  double q_star() const override { return config_.q_star(); }
  bool is_atomic() const override { return true; }
  bool is_gg_reference() const override { return true; }
  std::string describe() const override;
  /// Available for one-level cascades only.
  std::optional<DiscreteLaw> exact_overlap_law() const override;

 private:
  CascadeConfig config_;
};

/// mu = (1 - zeta) delta_{q*} + zeta delta_{q_0} for a one-level cascade in the
/// K -> infinity limit, with an estimate of the truncation bias at K.
/// Throws Unsupported for r != 1.
DiscreteLaw exact_overlap_law(const CascadeConfig& config);

}  // namespace gglab

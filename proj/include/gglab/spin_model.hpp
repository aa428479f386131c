#pragma once

// Finite-N mixed p-spin models. The energy of sigma in {-1,+1}^N is
//   H(sigma) = sum_p beta_p N^{-(p-1)/2} sum_{i_1<...<i_p} g_{i_1..i_p} sigma_{i_1}...sigma_{i_p}
// plus perturbation terms of the same shape with their own couplings, and the
// Gibbs measure is proportional to exp(H). Overlaps are (1/N) sigma . sigma',
// so every configuration has self-overlap 1.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <span>
#include <vector>

#include "gglab/measure.hpp"

namespace gglab {

using Spins = std::vector<std::int8_t>;

inline constexpr std::size_t kMaxEnumeratedSpins = 22;

struct PSpinTerm {
  int p = 2;
  double beta = 1.0;
};

struct PerturbationTerm {
  int p = 2;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

struct MixedPSpinModel {
  std::size_t n_spins = 0;
  std::vector<PSpinTerm> terms;
  std::vector<PerturbationTerm> perturbation;

  void validate() const;
};

/// SK: a single p = 2 term.
MixedPSpinModel sk_model(std::size_t n_spins, double beta);

/// Gaussian couplings, one vector per term in lexicographic order of the
/// index tuples i_1 < ... < i_p.
struct DisorderRealization {
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> couplings;              // per model term
  std::vector<std::vector<double>> perturbation_couplings;  // per perturbation term
};

/// Main couplings come from `seed`; each perturbation term uses its own seed,
/// so changing `seed` leaves the perturbation untouched.
DisorderRealization draw_disorder(const MixedPSpinModel& model, std::uint64_t seed);

double energy(const MixedPSpinModel& model, const DisorderRealization& disorder,
              std::span<const std::int8_t> sigma);

/// Appends perturbation terms (p, magnitude, seed).
MixedPSpinModel add_perturbation(MixedPSpinModel model, std::span<const PerturbationTerm> schedule);

/// Local fields for single-spin-flip dynamics.
class EnergyKernel {
 public:
  EnergyKernel(const MixedPSpinModel& model, const DisorderRealization& disorder);

  std::size_t size() const noexcept { return n_; }
  double energy(std::span<const std::int8_t> sigma) const;
  /// H(sigma with spin i flipped) - H(sigma).
  double flip_delta(std::span<const std::int8_t> sigma, std::size_t i) const;

 private:
  struct Entry {
    double coef;
    std::uint32_t first_other;  // offset into others_
    std::uint32_t n_other;
  };
  std::size_t n_ = 0;
  std::vector<std::vector<Entry>> per_spin_;
  std::vector<std::uint32_t> others_;
  std::vector<double> term_coefs_;               // every coupling times its prefactor
  std::vector<std::vector<std::uint32_t>> term_sites_;
};

struct MCParams {
  std::size_t sweeps = 10000;  // measurement sweeps for long single-chain runs
  std::size_t burn_in = 500;
  std::size_t thinning = 10;
  /// Inverse-temperature multipliers, increasing, last == 1. A single entry
  /// {1} means plain Metropolis; more entries enable replica exchange.
  std::vector<double> ladder{1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Geometric ladder lambda_min, ..., 1 with `count` rungs.
std::vector<double> geometric_ladder(double lambda_min, std::size_t count);

/// Random-site Metropolis targeting exp(lambda H) on every rung, with
/// neighbour swaps after each sweep; the lambda = 1 rung is the output.
class GibbsChain {
 public:
  GibbsChain(const EnergyKernel& kernel, std::vector<double> ladder, std::uint64_t seed);

  void sweep();
  void advance(std::size_t sweeps);
  const Spins& state() const noexcept { return rungs_.back(); }
  double swap_acceptance() const noexcept;

 private:
  const EnergyKernel* kernel_;
  std::vector<double> ladder_;
  std::vector<Spins> rungs_;
  std::vector<double> energies_;
  Rng rng_;
  std::size_t swaps_tried_ = 0;
  std::size_t swaps_accepted_ = 0;
};

struct SpinSample {
  std::vector<Spins> configurations;
  OverlapMatrix overlaps;
};

/// n replicas, one per independent chain (seeded from mc.seed), after burn-in.
SpinSample gibbs_sample_replicas(const MixedPSpinModel& model, const DisorderRealization& disorder,
                                 std::size_t n, const MCParams& mc);

double spin_overlap(std::span<const std::int8_t> a, std::span<const std::int8_t> b);

/// Exact Gibbs weights over all 2^N configurations (index bit i = spin i is +1).
class EnumeratedGibbs final : public Realization {
 public:
  EnumeratedGibbs(const MixedPSpinModel& model, const DisorderRealization& disorder);

  std::size_t n_spins() const noexcept { return n_; }
  std::span<const double> weights() const noexcept { return weights_; }
  static Spins configuration(std::uint32_t index, std::size_t n);

  double q_star() const override { return 1.0; }
  bool is_atomic() const override { return true; }
  std::vector<Point> sample(std::size_t n, Rng& rng) override;
  double overlap(const Point& a, const Point& b) const override;
  void for_each_class(std::span<const Point> replicas, Rng& rng, std::size_t inner_m,
                      const ClassVisitor& visit) override;
  std::vector<ReplicaVector> embed(std::span<const Point> points) override;
  nlohmann::json to_json() const override;

 private:
  std::size_t n_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// Throws InvalidInput when N exceeds kMaxEnumeratedSpins.
EnumeratedGibbs enumerate_gibbs_exact(const MixedPSpinModel& model,
                                      const DisorderRealization& disorder);

/// E<I(R12 >= min(R13, R23))> over all triples of configurations, exactly.
double exact_ultrametricity(const EnumeratedGibbs& g);

struct SpinSourceConfig {
  MixedPSpinModel model;
  MCParams mc;
  bool enumerated = false;
  /// When set, every realization draws perturbation magnitudes uniformly in
  /// [lo, hi] (one draw per perturbation term).
  std::optional<std::pair<double, double>> perturbation_box;
};

/// Each realization is a fresh disorder draw; replicas come from Markov
/// chains (enumerated = false) or from the exact Gibbs weights.
class SpinSource final : public MeasureSource {
 public:
  explicit SpinSource(SpinSourceConfig config);

  const SpinSourceConfig& config() const noexcept { return config_; }
  std::unique_ptr<Realization> realize(std::uint64_t seed) const override;
  double q_star() const override { return 1.0; }
  bool is_atomic() const override { return config_.enumerated; }
  bool is_gg_reference() const override { return false; }
  std::string describe() const override;

 private:
  SpinSourceConfig config_;
};

}  // namespace gglab

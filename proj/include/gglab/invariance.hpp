#pragma once

// Reweighting invariance. With F(sigma) = sum_{l<=n} f_l(sigma . sigma^l) and
//   F_l = F - f_l(sigma . sigma^l) + E<f_l(R12)>   (l <= n), evaluated at sigma = sigma^l,
// the functional
//   phi(t) = E< Phi(R^n) exp(t sum_l F_l(sigma^l)) / <exp(t F(sigma))>_^n >
// does not depend on t for measures satisfying the Ghirlanda-Guerra
// identities. Partition weights W_alpha = G(B_alpha) transform under the map
//   T(W)_alpha = <I_{B_alpha} exp F>_ / <exp F>_.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gglab/function_spec.hpp"
#include "gglab/measure.hpp"
#include "gglab/report.hpp"

namespace gglab {

/// f_1, ..., f_n of one overlap each (stored 0-based).
struct BoundedFunctionFamily {
  std::vector<ScalarFunction> fs;

  std::size_t size() const noexcept { return fs.size(); }
  /// max_l sup |f_l| on [-q*, q*].
  double bound(double q_star) const noexcept;
  BoundedFunctionFamily scaled(double t) const;
};

/// F = sum_l f_l(overlaps[l]); overlaps must have at least n entries.
double eval_F(const BoundedFunctionFamily& fs, std::span<const double> overlaps);

/// F_l for the 0-based replica index l: the l-th term of F replaced by
/// mu_means[l]. For l >= n this is F itself.
double eval_F_l(const BoundedFunctionFamily& fs, std::span<const double> overlaps, std::size_t l,
                std::span<const double> mu_means);

enum class MuMode {
  estimated,  // independent block of realizations
  exact,      // the source's closed-form overlap law, falling back to estimated
};

struct PhiOptions {
  MuMode mu_mode = MuMode::estimated;
  double derivative_step = 0.05;
  /// Lets non-atomic sources estimate W and T(W) from inner draws.
  bool inner_mc_weights = false;
};

Estimate phi_estimate(double t, const OverlapFunction& phi, const BoundedFunctionFamily& fs,
                      const MeasureSource& source, const Budget& budget, std::uint64_t seed,
                      const RunContext& ctx = {}, const PhiOptions& options = {});

struct InvarianceResult {
  std::vector<double> t_grid;
  std::vector<Estimate> phi;       // phi(t) per grid point
  std::vector<TestReport> reports; // phi(0) vs phi(t) per grid point
  TestReport derivative;           // (phi(h) - phi(0)) / h against 0
};

/// All grid points share realizations and replicas, so differences are paired.
InvarianceResult invariance_test(const OverlapFunction& phi, const BoundedFunctionFamily& fs,
                                 const MeasureSource& source, std::span<const double> t_grid,
                                 const Budget& budget, std::uint64_t seed,
                                 const RunContext& ctx = {}, const PhiOptions& options = {});

/// Cells cut out by thresholds on sigma . sigma^l. Along each axis the cell
/// index counts the cuts strictly above the overlap, so cell 0 is the top
/// interval [c_max, inf). Several axes give the product refinement.
struct PartitionSpec {
  struct Axis {
    std::size_t replica = 0;  // 0-based l
    std::vector<double> cuts; // strictly increasing
  };
  std::vector<Axis> axes;

  static PartitionSpec whole_space() { return {}; }
  /// B_0 = {sigma . sigma^l >= c}, B_1 = complement.
  static PartitionSpec threshold(std::size_t replica, double c);

  std::size_t cells() const noexcept;
  std::size_t cell_of(std::span<const double> overlaps) const;
  std::size_t min_replicas() const noexcept;
  void validate() const;
};

using WeightVector = std::vector<double>;

/// Components in [0, 1] summing to 1 within 1e-10.
bool is_weight_vector(std::span<const double> w, double tol = 1e-10) noexcept;

/// W_alpha = G(B_alpha) for replicas of an atomic realization. Non-atomic
/// realizations throw Unsupported unless allow_inner_mc is set, in which case
/// W is the fraction of inner_m fresh draws in each cell.
WeightVector partition_weights(Realization& g, std::span<const Point> replicas,
                               const PartitionSpec& partition, Rng& rng,
                               bool allow_inner_mc = false, std::size_t inner_m = 256);

struct TMapResult {
  WeightVector weights;
  double delta = 1.0;
};

/// Two-cell map: Delta_t = W_1 e^t + 1 - W_1, T_t(W) = (W_1 e^t, 1 - W_1) / Delta_t.
TMapResult t_map(std::span<const double> w, double t);

/// T(W)_alpha = W_alpha e^{a_alpha} / sum_beta W_beta e^{a_beta}, where
/// a_alpha = log(<I_{B_alpha} e^F>_ / W_alpha) is the log mean of e^F on the cell.
WeightVector general_T(std::span<const double> w, std::span<const double> log_cell_factors);

/// T(W) computed from the classes of a realization.
WeightVector general_T(Realization& g, std::span<const Point> replicas,
                       const PartitionSpec& partition, const BoundedFunctionFamily& fs, Rng& rng,
                       bool allow_inner_mc = false, std::size_t inner_m = 256);

TestReport theorem2_test(const MeasureSource& source, const PartitionSpec& partition,
                         const WeightedOverlapFunction& varphi, const BoundedFunctionFamily& fs,
                         std::size_t n, const Budget& budget, std::uint64_t seed,
                         const RunContext& ctx = {}, const PhiOptions& options = {});

void to_json(nlohmann::json& j, const PartitionSpec& p);
void from_json(const nlohmann::json& j, PartitionSpec& p);
void to_json(nlohmann::json& j, const BoundedFunctionFamily& f);
void from_json(const nlohmann::json& j, BoundedFunctionFamily& f);

}  // namespace gglab

#pragma once

// Ultrametricity diagnostics: the triple statistic, triangle censuses, support
// and extension probes, barycenter bounds for three groups of replicas, and
// single-linkage trees.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gglab/measure.hpp"
#include "gglab/report.hpp"

namespace gglab {

struct UltrametricityResult {
  Estimate estimate;  // of E<I(R12 >= min(R13, R23))>
  std::size_t triples = 0;
  std::size_t violations = 0;
};

UltrametricityResult ultrametricity_stat(const MeasureSource& source, const Budget& budget,
                                         std::uint64_t seed, const RunContext& ctx = {});

/// (R12, R13, R23)
using OverlapTriple = std::array<double, 3>;

struct TriangleCensus {
  std::size_t total = 0;
  std::size_t equilateral = 0;  // all three within epsilon
  std::size_t isosceles = 0;    // two smallest within epsilon, largest apart
  std::size_t violating = 0;    // two smallest differ by epsilon or more
  /// max over triples and orderings of min(R13, R23) - R12, i.e. the gap
  /// between the two smallest overlaps. Below epsilon when nothing violates.
  double worst_margin = -std::numeric_limits<double>::infinity();
  /// Filled when embeddings were supplied: triples whose squared-distance
  /// form agrees with the overlap classification.
  std::optional<std::size_t> norm_form_agreement;
};

enum class TriangleClass { equilateral, isosceles, violating };

/// Classification of one unordered triple.
TriangleClass classify_triangle(const OverlapTriple& t, double epsilon);

TriangleCensus triangle_census(std::span<const OverlapTriple> triples, double epsilon);
/// Every triple i < j < k of every matrix.
TriangleCensus triangle_census(std::span<const OverlapMatrix> samples, double epsilon);
/// Also checks ||x1-x2||^2 <= max(||x1-x3||^2, ||x2-x3||^2) + 2 epsilon for
/// every ordering of each embedded triple.
TriangleCensus triangle_census(std::span<const std::array<ReplicaVector, 3>> triples,
                               double epsilon);

/// Probability that R^n ~ A (n = A.size()).
Estimate support_probe(const MeasureSource& source, const ConstraintMatrix& a,
                       const Budget& budget, std::uint64_t seed, const RunContext& ctx = {});

struct ExtensionReport {
  Estimate support;          // P(R^n ~ A)
  bool support_positive = false;
  double a_star = 0.0;
  bool gap_condition = false;  // a* + epsilon < q*
  Estimate extension;        // P(extension event)
  Estimate gamma;            // E<I(R12 >= a* + epsilon)>, reported only
  std::string verdict;       // "pass", "fail", "report" or "not-applicable"
  nlohmann::json metadata = nlohmann::json::object();
};

/// Event: R^n ~ A, |R_{l,n+1} - a_{l,n}| < epsilon for l < n and
/// R_{n,n+1} < a* + epsilon. Positivity is asserted only for GG references
/// whose preconditions hold; support counts as positive when its estimate
/// exceeds z_threshold standard errors.
ExtensionReport extension_probe(const MeasureSource& source, const ConstraintMatrix& a,
                                const Budget& budget, std::uint64_t seed,
                                const RunContext& ctx = {});

struct BarycenterReport {
  std::size_t m = 0;
  double q_star = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  std::array<double, 3> norms{};  // ||bar sigma^j||^2
  double p12 = 0.0, p13 = 0.0, p23 = 0.0;
  double norm_bound = 0.0;      // (m q* + m(m-1) c) / m^2
  double distance23 = 0.0;      // ||bar sigma^2 - bar sigma^3||^2
  double distance_bound = 0.0;  // 2 (q* - c) / m
  double gap = 0.0;             // p13 - p12
  double gap_bound = 0.0;       // sqrt(2 q* (q* - c) / m)
  bool conditions_hold = false; // within-group entries <= c and cross blocks equal a, b, c
  bool norms_ok = false;
  bool distance_ok = false;
  bool gap_ok = false;
  bool realizable = false;      // Gram matrix is positive semidefinite
};

inline constexpr double kBarycenterTolerance = 1e-9;

/// From the Gram matrix of the 3m replicas. Groups are 0-based index lists.
BarycenterReport barycenter_diagnostic(const OverlapMatrix& gram,
                                       const std::array<std::vector<std::size_t>, 3>& groups,
                                       double a, double b, double c);
BarycenterReport barycenter_diagnostic(std::span<const ReplicaVector> replicas,
                                       const std::array<std::vector<std::size_t>, 3>& groups,
                                       double a, double b, double c);

/// Groups {0..m-1}, {m..2m-1}, {2m..3m-1}; cross blocks a, b, c, entries within
/// a group `within`, diagonal q*.
OverlapMatrix pattern_gram(double a, double b, double c, double q_star, std::size_t m,
                           double within);
std::array<std::vector<std::size_t>, 3> contiguous_groups(std::size_t m);

/// Vectors with the given Gram matrix (eigendecomposition). Throws
/// InvalidInput when the matrix is not positive semidefinite.
std::vector<ReplicaVector> realize_gram(const OverlapMatrix& gram);

/// Smallest m <= m_max for which pattern_gram(a, b, c, q*, m, c) is not PSD.
std::optional<std::size_t> smallest_non_psd_m(double a, double b, double c, double q_star,
                                              std::size_t m_max);

struct UltrametricTree {
  struct Merge {
    std::size_t left = 0;   // node ids: leaves 0..n-1, merge k is node n+k
    std::size_t right = 0;
    double height = 0.0;    // dissimilarity q* - R at the merge
    std::size_t size = 0;
  };
  std::size_t leaves = 0;
  double q_star = 0.0;
  std::vector<Merge> merges;

  /// q* - (merge height of the lowest common ancestor); q* on the diagonal.
  OverlapMatrix cophenetic() const;
  /// Leaves labelled 1..n, branch lengths from merge heights.
  std::string newick() const;
  /// Merge heights, with heights closer than epsilon collapsed.
  std::vector<double> distinct_heights(double epsilon) const;
};

UltrametricTree build_ultrametric_tree(const OverlapMatrix& r);

/// max |cophenetic - R| over entries.
double cophenetic_error(const UltrametricTree& tree, const OverlapMatrix& r);

void to_json(nlohmann::json& j, const TriangleCensus& c);
void to_json(nlohmann::json& j, const ExtensionReport& r);
void to_json(nlohmann::json& j, const BarycenterReport& r);

}  // namespace gglab

#pragma once

// Replicas, overlap (Gram) matrices, constraint matrices and the elementary
// predicates built on them. Indices are 0-based throughout the C++ API; the
// config files use the 1-based replica labels R_{1,2}, R_{1,3}, ...

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gglab {

/// Rejected input: a precondition of an operation does not hold.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The operation exists but not for this kind of argument (e.g. an exact
/// law requested for a non-atomic source).
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// PSD tolerance relative to the largest diagonal entry.
inline constexpr double kPsdRelativeTolerance = 1e-9;

/// A point of the Hilbert ball in explicit finite coordinates.
struct ReplicaVector {
  std::vector<double> coords;

  std::size_t dimension() const noexcept { return coords.size(); }
  double squared_norm() const noexcept;
};

double dot(const ReplicaVector& a, const ReplicaVector& b);
double squared_distance(const ReplicaVector& a, const ReplicaVector& b);

/// Symmetric n x n matrix of replica scalar products, stored row-major.
class OverlapMatrix {
 public:
  OverlapMatrix() = default;
  /// Throws InvalidInput unless entries has n*n values and is exactly symmetric.
  OverlapMatrix(std::size_t n, std::vector<double> entries, double q_star);
  /// n x n matrix with q_star on the diagonal and `off` elsewhere.
  static OverlapMatrix constant(std::size_t n, double off, double q_star);

  std::size_t size() const noexcept { return n_; }
  double q_star() const noexcept { return q_star_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double value);
  std::span<const double> entries() const noexcept { return entries_; }

  /// Diagonal equals q_star within `tol`.
  bool has_diagonal(double tol) const noexcept;
  bool is_positive_semidefinite(double rel_tol = kPsdRelativeTolerance) const;
  /// Leading n x n block.
  OverlapMatrix leading(std::size_t n) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
  double q_star_ = 0.0;
};

/// Target matrix A with tolerance epsilon for the event R^n ~ A.
class ConstraintMatrix {
 public:
  ConstraintMatrix() = default;
  /// Throws InvalidInput unless symmetric, diagonal == q_star, PSD and epsilon > 0.
  ConstraintMatrix(std::size_t n, std::vector<double> entries, double q_star, double epsilon);
  static ConstraintMatrix uniform(std::size_t n, double off, double q_star, double epsilon);

  std::size_t size() const noexcept { return n_; }
  double q_star() const noexcept { return q_star_; }
  double epsilon() const noexcept { return epsilon_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * n_ + j]; }
  std::span<const double> entries() const noexcept { return entries_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
  double q_star_ = 0.0;
  double epsilon_ = 0.0;
};

/// Gram matrix of the replicas; q_star is taken from the first self-overlap.
OverlapMatrix overlap_matrix(std::span<const ReplicaVector> replicas);

/// |R_{l,l'} - a_{l,l'}| < epsilon for every l != l'. The diagonal is ignored.
bool matrix_approx(const OverlapMatrix& r, const ConstraintMatrix& a);

/// max(a_{1,n}, ..., a_{n-1,n}).
double a_star(const ConstraintMatrix& a);

/// I(r12 >= min(r13, r23)).
int ultrametric_indicator(double r12, double r13, double r23) noexcept;

/// Smallest eigenvalue of a symmetric row-major matrix.
double smallest_eigenvalue(std::span<const double> entries, std::size_t n);

/// lambda_min >= -rel_tol * max(1, max diagonal).
bool is_positive_semidefinite(std::span<const double> entries, std::size_t n,
                              double rel_tol = kPsdRelativeTolerance);

void to_json(nlohmann::json& j, const OverlapMatrix& m);
void from_json(const nlohmann::json& j, OverlapMatrix& m);
void to_json(nlohmann::json& j, const ConstraintMatrix& m);
void from_json(const nlohmann::json& j, ConstraintMatrix& m);

/// CSV with header sample,l,l2,overlap: one row per replica pair l < l2
/// (1-based) of each sample.
void write_overlap_csv(std::ostream& out, std::span<const OverlapMatrix> samples);

}  // namespace gglab

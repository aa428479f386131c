#include "gglab/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/Dense>

namespace gglab {

double ReplicaVector::squared_norm() const noexcept {
  double s = 0.0;
  for (double x : coords) s += x * x;
  return s;
}

double dot(const ReplicaVector& a, const ReplicaVector& b) {
  if (a.dimension() != b.dimension())
    throw InvalidInput("dot: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                       std::to_string(b.dimension()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) s += a.coords[i] * b.coords[i];
  return s;
}

double squared_distance(const ReplicaVector& a, const ReplicaVector& b) {
  if (a.dimension() != b.dimension()) throw InvalidInput("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    const double d = a.coords[i] - b.coords[i];
    s += d * d;
  }
  return s;
}

namespace {

void require_square(std::size_t n, std::size_t count, const char* what) {
  if (n == 0) throw InvalidInput(std::string(what) + ": size must be positive");
  if (count != n * n)
    throw InvalidInput(std::string(what) + ": expected " + std::to_string(n * n) +
                       " entries, got " + std::to_string(count));
}

void require_symmetric(std::span<const double> e, std::size_t n, const char* what) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (e[i * n + j] != e[j * n + i])
        throw InvalidInput(std::string(what) + ": not symmetric at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
}

}  // namespace

OverlapMatrix::OverlapMatrix(std::size_t n, std::vector<double> entries, double q_star)
    : n_(n), entries_(std::move(entries)), q_star_(q_star) {
  require_square(n_, entries_.size(), "OverlapMatrix");
  require_symmetric(entries_, n_, "OverlapMatrix");
}

OverlapMatrix OverlapMatrix::constant(std::size_t n, double off, double q_star) {
  std::vector<double> e(n * n, off);
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = q_star;
  return OverlapMatrix(n, std::move(e), q_star);
}

void OverlapMatrix::set(std::size_t i, std::size_t j, double value) {
  entries_[i * n_ + j] = value;
  entries_[j * n_ + i] = value;
}

bool OverlapMatrix::has_diagonal(double tol) const noexcept {
  for (std::size_t i = 0; i < n_; ++i)
    if (std::abs(entries_[i * n_ + i] - q_star_) > tol) return false;
  return true;
}

bool OverlapMatrix::is_positive_semidefinite(double rel_tol) const {
  return gglab::is_positive_semidefinite(entries_, n_, rel_tol);
}

OverlapMatrix OverlapMatrix::leading(std::size_t n) const {
  if (n == 0 || n > n_) throw InvalidInput("OverlapMatrix::leading: bad size");
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) e[i * n + j] = entries_[i * n_ + j];
  return OverlapMatrix(n, std::move(e), q_star_);
}

ConstraintMatrix::ConstraintMatrix(std::size_t n, std::vector<double> entries, double q_star,
                                   double epsilon)
    : n_(n), entries_(std::move(entries)), q_star_(q_star), epsilon_(epsilon) {
  require_square(n_, entries_.size(), "ConstraintMatrix");
  require_symmetric(entries_, n_, "ConstraintMatrix");
  if (!(epsilon_ > 0.0)) throw InvalidInput("ConstraintMatrix: epsilon must be > 0");
  for (std::size_t i = 0; i < n_; ++i)
    if (entries_[i * n_ + i] != q_star_)
      throw InvalidInput("ConstraintMatrix: diagonal must equal q_star");
  if (!gglab::is_positive_semidefinite(entries_, n_))
    throw InvalidInput("ConstraintMatrix: not positive semi-definite");
}

ConstraintMatrix ConstraintMatrix::uniform(std::size_t n, double off, double q_star,
                                           double epsilon) {
  std::vector<double> e(n * n, off);
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = q_star;
  return ConstraintMatrix(n, std::move(e), q_star, epsilon);
}

OverlapMatrix overlap_matrix(std::span<const ReplicaVector> replicas) {
  if (replicas.empty()) throw InvalidInput("overlap_matrix: empty replica list");
  const std::size_t n = replicas.size();
  const std::size_t dim = replicas.front().dimension();
  for (const auto& r : replicas)
    if (r.dimension() != dim) throw InvalidInput("overlap_matrix: dimension mismatch");
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(replicas[i], replicas[j]);
      e[i * n + j] = v;
      e[j * n + i] = v;
    }
  const double q = e[0];
  return OverlapMatrix(n, std::move(e), q);
}

bool matrix_approx(const OverlapMatrix& r, const ConstraintMatrix& a) {
  if (r.size() != a.size()) throw InvalidInput("matrix_approx: size mismatch");
  const double eps = a.epsilon();
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j)
      if (!(std::abs(r(i, j) - a(i, j)) < eps)) return false;
  return true;
}

double a_star(const ConstraintMatrix& a) {
  const std::size_t n = a.size();
  if (n < 2) throw InvalidInput("a_star: need n >= 2");
  double best = a(0, n - 1);
  for (std::size_t l = 1; l + 1 < n; ++l) best = std::max(best, a(l, n - 1));
  return best;
}

int ultrametric_indicator(double r12, double r13, double r23) noexcept {
  return r12 >= std::min(r13, r23) ? 1 : 0;
}

double smallest_eigenvalue(std::span<const double> entries, std::size_t n) {
  require_square(n, entries.size(), "smallest_eigenvalue");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      entries.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

bool is_positive_semidefinite(std::span<const double> entries, std::size_t n, double rel_tol) {
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(entries[i * n + i]));
  return smallest_eigenvalue(entries, n) >= -rel_tol * scale;
}

void to_json(nlohmann::json& j, const OverlapMatrix& m) {
  j = nlohmann::json{{"n", m.size()},
                     {"q_star", m.q_star()},
                     {"entries", std::vector<double>(m.entries().begin(), m.entries().end())}};
}

void from_json(const nlohmann::json& j, OverlapMatrix& m) {
  m = OverlapMatrix(j.at("n").get<std::size_t>(), j.at("entries").get<std::vector<double>>(),
                    j.at("q_star").get<double>());
}

void to_json(nlohmann::json& j, const ConstraintMatrix& m) {
  j = nlohmann::json{{"n", m.size()},
                     {"q_star", m.q_star()},
                     {"epsilon", m.epsilon()},
                     {"entries", std::vector<double>(m.entries().begin(), m.entries().end())}};
}

void from_json(const nlohmann::json& j, ConstraintMatrix& m) {
  m = ConstraintMatrix(j.at("n").get<std::size_t>(), j.at("entries").get<std::vector<double>>(),
                       j.at("q_star").get<double>(), j.at("epsilon").get<double>());
}

void write_overlap_csv(std::ostream& out, std::span<const OverlapMatrix> samples) {
  out << "sample,l,l2,overlap\n";
  char buf[32];
  for (std::size_t s = 0; s < samples.size(); ++s)
    for (std::size_t i = 0; i < samples[s].size(); ++i)
      for (std::size_t j = i + 1; j < samples[s].size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.10g", samples[s](i, j));
        out << s << ',' << i + 1 << ',' << j + 1 << ',' << buf << '\n';
      }
}

}  // namespace gglab

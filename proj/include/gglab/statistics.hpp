#pragma once

// Monte Carlo plumbing: estimates, running means and the realization-level
// bootstrap shared by every statistical test.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

namespace gglab {

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Pools two independent estimates of the same quantity.
Estimate merge(const Estimate& a, const Estimate& b);

/// Mean and sample standard error of i.i.d. values.
Estimate estimate_from(std::span<const double> values);

/// Welford running mean/variance. A constant stream has a bit-exact mean.
class RunningMean {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Row-major table of per-realization statistics.
class Block {
 public:
  Block() = default;
  Block(std::size_t rows, std::size_t cols) : cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return cols_ == 0 ? 0 : data_.size() / cols_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  /// Welford column means in row order.
  std::vector<double> column_means() const;
  /// Column means of the rows selected by `rows` (with repetition).
  std::vector<double> column_means(std::span<const std::size_t> rows) const;

 private:
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A statistic of the column means of a main block and an auxiliary block.
using BlockStatistic =
    std::function<double(std::span<const double> main, std::span<const double> aux)>;

/// Bootstrap standard deviations of several statistics: rows of both blocks
/// are resampled independently, with replacement, `resamples` times.
std::vector<double> bootstrap_standard_errors(const Block& main, const Block& aux,
                                              std::span<const BlockStatistic> statistics,
                                              std::size_t resamples, std::uint64_t seed);

/// diff / se, with 0/0 read as 0 (exact agreement) and x/0 as +-inf.
double z_score(double diff, double se) noexcept;

void to_json(nlohmann::json& j, const Estimate& e);
void from_json(const nlohmann::json& j, Estimate& e);

}  // namespace gglab

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace lockstep {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double compensated_sum(std::span<const double> values);

/// Compensated inner product, accumulated in index order. Throws DimensionError
/// on a length mismatch.
double dot(std::span<const double> a, std::span<const double> b);

double norm(std::span<const double> v);

bool all_finite(std::span<const double> v);

/// Returns w + scale * direction.
std::vector<double> add_scaled(std::span<const double> w, double scale,
                               std::span<const double> direction);

/// Median of a copy of `values`; 0 for an empty input.
double median(std::vector<double> values);

}  // namespace lockstep

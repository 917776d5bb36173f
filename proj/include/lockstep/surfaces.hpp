#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lockstep/model.hpp"

namespace lockstep {

/// L(w) = 0.5 w^T H w + b^T w + c with H exactly symmetric.
class QuadraticSurface {
 public:
  /// `hessian` is d x d row-major and is symmetrized by averaging
  /// (H[i][j] = H[j][i] = (H[i][j] + H[j][i]) / 2). Throws DimensionError for
  /// bad lengths and NumericFailure for non-finite entries.
  QuadraticSurface(std::size_t d, std::vector<double> hessian, std::vector<double> linear,
                   double constant);

  /// Entries of H, b and c drawn from U[-1, 1]; H symmetrized.
  static QuadraticSurface random(std::size_t d, std::uint64_t seed);

  /// H = 0.
  static QuadraticSurface linear(std::vector<double> linear, double constant);

  std::size_t dim() const { return d_; }
  double h(std::size_t i, std::size_t j) const { return hessian_[i * d_ + j]; }
  std::span<const double> hessian() const { return hessian_; }
  std::span<const double> linear_term() const { return linear_; }
  double constant() const { return constant_; }

 private:
  std::size_t d_;
  std::vector<double> hessian_;
  std::vector<double> linear_;
  double constant_;
};

double q_loss(const QuadraticSurface& s, std::span<const double> w);
std::vector<double> q_grad(const QuadraticSurface& s, std::span<const double> w);

/// 0.5 delta^T H delta: the entire beyond-first-order part of L(w + delta) - L(w).
double exact_higher_order(const QuadraticSurface& s, std::span<const double> delta);

/// -sum_{i<j} H[i][j] delta_i delta_j: the gap between the joint step and the
/// sum of single-coordinate steps.
double exact_cross_penalty(const QuadraticSurface& s, std::span<const double> delta);

/// A quadratic surface exposed through the LossModel interface. Batches are
/// ignored unless per-batch linear shifts are given, in which case batch k
/// sees L(w) + shift[k mod n]^T w (same curvature, different gradients).
class SurfaceModel final : public LossModel {
 public:
  explicit SurfaceModel(QuadraticSurface surface, std::vector<std::vector<double>> batch_shifts = {});

  const QuadraticSurface& surface() const { return surface_; }

  std::size_t dim() const override { return surface_.dim(); }
  double loss(std::span<const double> w, const Batch& batch) const override;
  LossAndGradient loss_and_gradient(std::span<const double> w, const Batch& batch) const override;

 private:
  const std::vector<double>* shift_for(const Batch& batch) const;

  QuadraticSurface surface_;
  std::vector<std::vector<double>> shifts_;
};

}  // namespace lockstep

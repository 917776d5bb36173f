#include "lockstep/surfaces.hpp"

#include <cmath>
#include <string>

#include "lockstep/error.hpp"
#include "lockstep/numeric.hpp"
#include "lockstep/rng.hpp"

namespace lockstep {
namespace {

void check_length(const QuadraticSurface& s, std::span<const double> v, const char* what) {
  if (v.size() != s.dim()) {
    throw DimensionError(std::string(what) + ": length " + std::to_string(v.size()) +
                         " on a surface of dimension " + std::to_string(s.dim()));
  }
}

}  // namespace

QuadraticSurface::QuadraticSurface(std::size_t d, std::vector<double> hessian,
                                   std::vector<double> linear, double constant)
    : d_(d), hessian_(std::move(hessian)), linear_(std::move(linear)), constant_(constant) {
  if (hessian_.size() != d_ * d_) throw DimensionError("QuadraticSurface: H must be d x d");
  if (linear_.size() != d_) throw DimensionError("QuadraticSurface: b must have length d");
  for (std::size_t i = 0; i < d_; ++i) {
    for (std::size_t j = i + 1; j < d_; ++j) {
      const double avg = 0.5 * (hessian_[i * d_ + j] + hessian_[j * d_ + i]);
      hessian_[i * d_ + j] = avg;
      hessian_[j * d_ + i] = avg;
    }
  }
  if (!all_finite(hessian_) || !all_finite(linear_) || !std::isfinite(constant_)) {
    throw NumericFailure("QuadraticSurface has non-finite entries");
  }
}

QuadraticSurface QuadraticSurface::random(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> h(d * d), b(d);
  for (double& v : h) v = rng.uniform(-1.0, 1.0);
  for (double& v : b) v = rng.uniform(-1.0, 1.0);
  const double c = rng.uniform(-1.0, 1.0);
  return QuadraticSurface(d, std::move(h), std::move(b), c);
}

QuadraticSurface QuadraticSurface::linear(std::vector<double> linear, double constant) {
  const std::size_t d = linear.size();
  return QuadraticSurface(d, std::vector<double>(d * d, 0.0), std::move(linear), constant);
}

namespace {

std::vector<double> hessian_times(const QuadraticSurface& s, std::span<const double> v) {
  const std::size_t d = s.dim();
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = dot(s.hessian().subspan(i * d, d), v);
  return out;
}

}  // namespace

double q_loss(const QuadraticSurface& s, std::span<const double> w) {
  check_length(s, w, "q_loss");
  const auto hw = hessian_times(s, w);
  CompensatedSum acc;
  acc.add(0.5 * dot(w, hw));
  acc.add(dot(s.linear_term(), w));
  acc.add(s.constant());
  return acc.value();
}

std::vector<double> q_grad(const QuadraticSurface& s, std::span<const double> w) {
  check_length(s, w, "q_grad");
  auto g = hessian_times(s, w);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += s.linear_term()[i];
  return g;
}

double exact_higher_order(const QuadraticSurface& s, std::span<const double> delta) {
  check_length(s, delta, "exact_higher_order");
  return 0.5 * dot(delta, hessian_times(s, delta));
}

double exact_cross_penalty(const QuadraticSurface& s, std::span<const double> delta) {
  check_length(s, delta, "exact_cross_penalty");
  CompensatedSum acc;
  for (std::size_t i = 0; i < s.dim(); ++i) {
    for (std::size_t j = i + 1; j < s.dim(); ++j) acc.add(s.h(i, j) * delta[i] * delta[j]);
  }
  return -acc.value();
}

SurfaceModel::SurfaceModel(QuadraticSurface surface, std::vector<std::vector<double>> batch_shifts)
    : surface_(std::move(surface)), shifts_(std::move(batch_shifts)) {
  for (const auto& s : shifts_) {
    if (s.size() != surface_.dim()) throw DimensionError("SurfaceModel: shift has wrong length");
  }
}

const std::vector<double>* SurfaceModel::shift_for(const Batch& batch) const {
  if (shifts_.empty()) return nullptr;
  const auto n = static_cast<std::int64_t>(shifts_.size());
  const auto k = ((batch.batch_id % n) + n) % n;
  return &shifts_[static_cast<std::size_t>(k)];
}

double SurfaceModel::loss(std::span<const double> w, const Batch& batch) const {
  const double base = q_loss(surface_, w);
  const auto* shift = shift_for(batch);
  const double value = shift ? base + dot(*shift, w) : base;
  if (!std::isfinite(value)) throw NumericFailure("non-finite surface loss");
  return value;
}

LossAndGradient SurfaceModel::loss_and_gradient(std::span<const double> w, const Batch& batch) const {
  LossAndGradient out;
  out.loss = loss(w, batch);
  out.gradient = q_grad(surface_, w);
  if (const auto* shift = shift_for(batch)) {
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += (*shift)[i];
  }
  if (!all_finite(out.gradient)) throw NumericFailure("non-finite surface gradient");
  return out;
}

}  // namespace lockstep

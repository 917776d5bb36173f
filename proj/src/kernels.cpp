#include "lockstep/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "lockstep/parallel.hpp"

namespace lockstep::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

using Index = std::int64_t;

}  // namespace

void affine_forward(std::span<const double> in, std::size_t rows, std::size_t fan_in,
                    std::span<const double> weights, std::span<const double> bias,
                    std::size_t fan_out, std::span<double> out) {
  const double* x = in.data();
  const double* w = weights.data();
  const double* b = bias.data();
  double* z = out.data();
  const bool par = rows * fan_in * fan_out >= kParallelWork;
#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (par)
  for (Index r = 0; r < static_cast<Index>(rows); ++r) {
    double* zr = z + r * fan_out;
    const double* xr = x + r * fan_in;
    std::copy(b, b + fan_out, zr);
    for (std::size_t k = 0; k < fan_in; ++k) {
      const double xk = xr[k];
      if (xk == 0.0) continue;
      const double* wk = w + k * fan_out;
      for (std::size_t j = 0; j < fan_out; ++j) zr[j] += xk * wk[j];
    }
  }
}

void affine_weight_grad(std::span<const double> in, std::size_t rows, std::size_t fan_in,
                        std::span<const double> d_out, std::size_t fan_out,
                        std::span<double> d_weights, std::span<double> d_bias) {
  const double* x = in.data();
  const double* g = d_out.data();
  double* dw = d_weights.data();
  const bool par = rows * fan_in * fan_out >= kParallelWork;
#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (par)
  for (Index k = 0; k < static_cast<Index>(fan_in); ++k) {
    double* dwk = dw + k * fan_out;
    std::fill(dwk, dwk + fan_out, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double xk = x[r * fan_in + k];
      if (xk == 0.0) continue;
      const double* gr = g + r * fan_out;
      for (std::size_t j = 0; j < fan_out; ++j) dwk[j] += xk * gr[j];
    }
  }
  std::fill(d_bias.begin(), d_bias.end(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * fan_out;
    for (std::size_t j = 0; j < fan_out; ++j) d_bias[j] += gr[j];
  }
}

void affine_input_grad(std::span<const double> d_out, std::size_t rows, std::size_t fan_out,
                       std::span<const double> weights, std::size_t fan_in,
                       std::span<double> d_in) {
  const double* g = d_out.data();
  const double* w = weights.data();
  double* dx = d_in.data();
  const bool par = rows * fan_in * fan_out >= kParallelWork;
#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (par)
  for (Index r = 0; r < static_cast<Index>(rows); ++r) {
    const double* gr = g + r * fan_out;
    double* dxr = dx + r * fan_in;
    for (std::size_t k = 0; k < fan_in; ++k) {
      const double* wk = w + k * fan_out;
      double acc = 0.0;
      for (std::size_t j = 0; j < fan_out; ++j) acc += gr[j] * wk[j];
      dxr[k] = acc;
    }
  }
}

void activate(Activation act, std::span<const double> pre, std::span<double> post) {
  const Index n = static_cast<Index>(pre.size());
  const bool par = pre.size() >= kParallelWork;
  if (act == Activation::relu) {
#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (par)
    for (Index i = 0; i < n; ++i) post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
  } else {
#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (par)
    for (Index i = 0; i < n; ++i) post[i] = std::tanh(pre[i]);
  }
}

void activation_backward(Activation act, std::span<const double> pre,
                         std::span<const double> post, std::span<double> grad) {
  const Index n = static_cast<Index>(pre.size());
  if (act == Activation::relu) {
    for (Index i = 0; i < n; ++i) {
      if (!(pre[i] > 0.0)) grad[i] = 0.0;
    }
  } else {
    for (Index i = 0; i < n; ++i) grad[i] *= 1.0 - post[i] * post[i];
  }
}

void softmax_cross_entropy(std::span<const double> logits, std::size_t rows, std::size_t classes,
                           std::span<const double> labels, double grad_scale,
                           std::span<double> row_loss, std::span<double> d_logits) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * classes;
    const double peak = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(z[c] - peak);
    const double log_total = std::log(total);
    const auto y = static_cast<std::size_t>(labels[r]);
    row_loss[r] = log_total - (z[y] - peak);
    if (!d_logits.empty()) {
      double* d = d_logits.data() + r * classes;
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(z[c] - peak - log_total);
        d[c] = (p - (c == y ? 1.0 : 0.0)) * grad_scale;
      }
    }
  }
}

void half_squared_error(std::span<const double> pred, std::size_t rows, std::size_t width,
                        std::span<const double> targets, double grad_scale,
                        std::span<double> row_loss, std::span<double> d_pred) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double e = pred[r * width + j] - targets[r * width + j];
      acc += e * e;
      if (!d_pred.empty()) d_pred[r * width + j] = e * grad_scale;
    }
    row_loss[r] = 0.5 * acc;
  }
}

}  // namespace lockstep::kernels

#pragma once

#include <cstddef>
#include <span>

namespace lockstep {

enum class Activation { relu, tanh };

/// Batched dense kernels over row-major matrices. Every output element is
/// produced by exactly one thread with a fixed accumulation order, so results
/// are bitwise independent of the thread count.
namespace kernels {

/// out[r][j] = bias[j] + sum_k in[r][k] * weights[k][j]
/// `weights` is fan_in x fan_out row-major. Parallel over rows.
void affine_forward(std::span<const double> in, std::size_t rows, std::size_t fan_in,
                    std::span<const double> weights, std::span<const double> bias,
                    std::size_t fan_out, std::span<double> out);

/// d_weights[k][j] = sum_r in[r][k] * d_out[r][j],  d_bias[j] = sum_r d_out[r][j].
/// Overwrites both outputs. Parallel over k.
void affine_weight_grad(std::span<const double> in, std::size_t rows, std::size_t fan_in,
                        std::span<const double> d_out, std::size_t fan_out,
                        std::span<double> d_weights, std::span<double> d_bias);

/// d_in[r][k] = sum_j d_out[r][j] * weights[k][j]. Parallel over rows.
void affine_input_grad(std::span<const double> d_out, std::size_t rows, std::size_t fan_out,
                       std::span<const double> weights, std::size_t fan_in,
                       std::span<double> d_in);

void activate(Activation act, std::span<const double> pre, std::span<double> post);

/// grad[i] *= act'(pre[i]), with post = act(pre) supplied for tanh.
void activation_backward(Activation act, std::span<const double> pre,
                         std::span<const double> post, std::span<double> grad);

/// Per-row softmax cross-entropy with max subtraction. Writes the row losses
/// and d_logits = (softmax - onehot) * grad_scale.
void softmax_cross_entropy(std::span<const double> logits, std::size_t rows, std::size_t classes,
                           std::span<const double> labels, double grad_scale,
                           std::span<double> row_loss, std::span<double> d_logits);

/// Per-row 0.5 * ||pred - target||^2 and d_pred = (pred - target) * grad_scale.
/// `targets` is rows x width.
void half_squared_error(std::span<const double> pred, std::size_t rows, std::size_t width,
                        std::span<const double> targets, double grad_scale,
                        std::span<double> row_loss, std::span<double> d_pred);

}  // namespace kernels
}  // namespace lockstep

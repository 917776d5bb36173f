#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lockstep/data.hpp"
#include "lockstep/kernels.hpp"

namespace lockstep {

enum class LossKind { softmax_cross_entropy, mse };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind k);
Activation parse_activation(std::string_view s);
LossKind parse_loss_kind(std::string_view s);

/// Dense multilayer perceptron architecture.
///
/// Flat parameter layout, layer by layer: for layer l with fan_in = widths[l]
/// and fan_out = widths[l+1], the fan_in x fan_out weight matrix in row-major
/// order (entry [k][j] connects input k to unit j), followed by its fan_out
/// biases. Hidden layers apply the activation; the output layer is linear and
/// feeds the loss.
class MlpSpec {
 public:
  struct LayerSlot {
    std::size_t fan_in;
    std::size_t fan_out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  /// Throws DimensionError for fewer than 2 widths or a zero width.
  MlpSpec(std::vector<std::size_t> layer_widths, Activation activation, LossKind loss_kind);

  const std::vector<std::size_t>& layer_widths() const { return widths_; }
  Activation activation() const { return activation_; }
  LossKind loss_kind() const { return loss_kind_; }
  std::size_t num_layers() const { return slots_.size(); }
  const LayerSlot& layer(std::size_t l) const { return slots_.at(l); }
  std::size_t param_count() const { return param_count_; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }

 private:
  std::vector<std::size_t> widths_;
  Activation activation_;
  LossKind loss_kind_;
  std::vector<LayerSlot> slots_;
  std::size_t param_count_ = 0;
};

/// All weights and biases of a network, finite by construction.
class ParamVector {
 public:
  /// Throws NumericFailure if any entry is NaN or Inf.
  explicit ParamVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// In-place w += scale * direction; rejects a non-finite result.
  void add_scaled(double scale, std::span<const double> direction);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// Mean minibatch gradient in the ParamVector layout.
struct GradVector {
  std::vector<double> values;
  std::int64_t batch_id = -1;
  std::int64_t step = -1;

  std::span<const double> view() const { return values; }
};

struct LayerParams {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;  // fan_in x fan_out
  std::vector<double> biases;   // fan_out
};

std::vector<LayerParams> unpack(const MlpSpec& spec, std::span<const double> flat);
ParamVector pack(const MlpSpec& spec, const std::vector<LayerParams>& layers);

/// Glorot-uniform weights, U[-s, s] with s = sqrt(6 / (fan_in + fan_out)); zero biases.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean per-example loss over the batch. Throws DimensionError for shape
/// problems and NumericFailure for a non-finite result.
double loss(const MlpSpec& spec, std::span<const double> w, const Dataset& data,
            const Batch& batch);
double loss(const MlpSpec& spec, const ParamVector& params, const Dataset& data,
            const Batch& batch);

/// Exact reverse-mode gradient of `loss`. The returned loss is bitwise equal
/// to what `loss` returns for the same inputs.
LossAndGradient loss_and_gradient(const MlpSpec& spec, std::span<const double> w,
                                  const Dataset& data, const Batch& batch);

GradVector gradient(const MlpSpec& spec, const ParamVector& params, const Dataset& data,
                    const Batch& batch, std::int64_t step = -1);

/// Hidden-layer pre-activations for every example in the batch, concatenated.
std::vector<double> hidden_preactivations(const MlpSpec& spec, std::span<const double> w,
                                          const Dataset& data, const Batch& batch);

/// Checks that the spec and the dataset agree (input dim, label kind, classes).
void check_compatible(const MlpSpec& spec, const Dataset& data);

}  // namespace lockstep

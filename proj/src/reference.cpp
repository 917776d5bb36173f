#include "lockstep/reference.hpp"

#include <algorithm>
#include <cmath>

#include "lockstep/error.hpp"

namespace lockstep::reference {
namespace {

double act(Activation a, double z) { return a == Activation::relu ? std::max(z, 0.0) : std::tanh(z); }

double act_prime(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

// Weight [k][j] of layer l.
double weight(const MlpSpec& spec, std::span<const double> w, std::size_t l, std::size_t k,
              std::size_t j) {
  const auto& s = spec.layer(l);
  return w[s.weight_offset + k * s.fan_out + j];
}

struct ExampleTrace {
  std::vector<std::vector<double>> z;  // per layer pre-activation
  std::vector<std::vector<double>> a;  // a[0] = input, a[l+1] = act(z[l]) (output layer: z)
};

ExampleTrace forward_one(const MlpSpec& spec, std::span<const double> w, std::span<const double> x) {
  ExampleTrace t;
  t.a.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& s = spec.layer(l);
    std::vector<double> z(s.fan_out);
    for (std::size_t j = 0; j < s.fan_out; ++j) {
      double acc = w[s.bias_offset + j];
      for (std::size_t k = 0; k < s.fan_in; ++k) acc += t.a[l][k] * weight(spec, w, l, k, j);
      z[j] = acc;
    }
    std::vector<double> a(z);
    if (l + 1 < spec.num_layers()) {
      for (double& v : a) v = act(spec.activation(), v);
    }
    t.z.push_back(std::move(z));
    t.a.push_back(std::move(a));
  }
  return t;
}

// Loss of one example and d loss / d output.
double example_loss(const MlpSpec& spec, const std::vector<double>& out, double label,
                    std::size_t num_classes, std::vector<double>& d_out) {
  d_out.assign(out.size(), 0.0);
  if (spec.loss_kind() == LossKind::softmax_cross_entropy) {
    const auto y = static_cast<std::size_t>(label);
    double peak = out[0];
    for (double v : out) peak = std::max(peak, v);
    double total = 0.0;
    for (double v : out) total += std::exp(v - peak);
    for (std::size_t c = 0; c < out.size(); ++c) {
      d_out[c] = std::exp(out[c] - peak) / total - (c == y ? 1.0 : 0.0);
    }
    return std::log(total) + peak - out[y];
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double target = num_classes == 0 ? label : (static_cast<std::size_t>(label) == c ? 1.0 : 0.0);
    d_out[c] = out[c] - target;
    acc += d_out[c] * d_out[c];
  }
  return 0.5 * acc;
}

}  // namespace

double loss(const MlpSpec& spec, std::span<const double> w, const Dataset& data,
            const Batch& batch) {
  check_compatible(spec, data);
  if (batch.indices.empty()) throw DimensionError("empty batch");
  double total = 0.0;
  std::vector<double> scratch;
  for (std::size_t i : batch.indices) {
    const auto t = forward_one(spec, w, data.row(i));
    total += example_loss(spec, t.a.back(), data.labels[i], data.num_classes, scratch);
  }
  const double mean = total / static_cast<double>(batch.indices.size());
  if (!std::isfinite(mean)) throw NumericFailure("non-finite loss");
  return mean;
}

std::vector<double> gradient(const MlpSpec& spec, std::span<const double> w,
                             const Dataset& data, const Batch& batch) {
  check_compatible(spec, data);
  if (batch.indices.empty()) throw DimensionError("empty batch");
  std::vector<double> grad(spec.param_count(), 0.0);
  std::vector<double> delta;
  for (std::size_t i : batch.indices) {
    const auto t = forward_one(spec, w, data.row(i));
    example_loss(spec, t.a.back(), data.labels[i], data.num_classes, delta);
    for (std::size_t l = spec.num_layers(); l-- > 0;) {
      const auto& s = spec.layer(l);
      for (std::size_t j = 0; j < s.fan_out; ++j) {
        grad[s.bias_offset + j] += delta[j];
        for (std::size_t k = 0; k < s.fan_in; ++k) {
          grad[s.weight_offset + k * s.fan_out + j] += t.a[l][k] * delta[j];
        }
      }
      if (l == 0) break;
      std::vector<double> prev(s.fan_in, 0.0);
      for (std::size_t k = 0; k < s.fan_in; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s.fan_out; ++j) acc += weight(spec, w, l, k, j) * delta[j];
        prev[k] = acc * act_prime(spec.activation(), t.z[l - 1][k]);
      }
      delta = std::move(prev);
    }
  }
  const double n = static_cast<double>(batch.indices.size());
  for (double& g : grad) g /= n;
  return grad;
}

}  // namespace lockstep::reference

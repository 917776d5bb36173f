#include "lockstep/mlp.hpp"

#include <cmath>
#include <string>

#include "lockstep/error.hpp"
#include "lockstep/numeric.hpp"
#include "lockstep/rng.hpp"

namespace lockstep {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

std::string_view to_string(LossKind k) {
  return k == LossKind::softmax_cross_entropy ? "softmax_cross_entropy" : "mse";
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "softmax_cross_entropy") return LossKind::softmax_cross_entropy;
  if (s == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + std::string(s) + "'");
}

MlpSpec::MlpSpec(std::vector<std::size_t> layer_widths, Activation activation, LossKind loss_kind)
    : widths_(std::move(layer_widths)), activation_(activation), loss_kind_(loss_kind) {
  if (widths_.size() < 2) throw DimensionError("MlpSpec needs at least 2 layer widths");
  for (std::size_t w : widths_) {
    if (w < 1) throw DimensionError("MlpSpec widths must be >= 1");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    LayerSlot s{widths_[l], widths_[l + 1], offset, offset + widths_[l] * widths_[l + 1]};
    offset = s.bias_offset + s.fan_out;
    slots_.push_back(s);
  }
  param_count_ = offset;
}

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  if (!all_finite(values_)) throw NumericFailure("parameter vector has non-finite entries");
}

void ParamVector::add_scaled(double scale, std::span<const double> direction) {
  if (direction.size() != values_.size()) {
    throw DimensionError("ParamVector::add_scaled length mismatch");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * direction[i];
  if (!all_finite(values_)) throw NumericFailure("parameter update produced non-finite entries");
}

std::vector<LayerParams> unpack(const MlpSpec& spec, std::span<const double> flat) {
  if (flat.size() != spec.param_count()) throw DimensionError("unpack: wrong parameter count");
  std::vector<LayerParams> layers;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& s = spec.layer(l);
    LayerParams p;
    p.fan_in = s.fan_in;
    p.fan_out = s.fan_out;
    const auto w = flat.subspan(s.weight_offset, s.fan_in * s.fan_out);
    const auto b = flat.subspan(s.bias_offset, s.fan_out);
    p.weights.assign(w.begin(), w.end());
    p.biases.assign(b.begin(), b.end());
    layers.push_back(std::move(p));
  }
  return layers;
}

ParamVector pack(const MlpSpec& spec, const std::vector<LayerParams>& layers) {
  if (layers.size() != spec.num_layers()) throw DimensionError("pack: wrong layer count");
  std::vector<double> flat(spec.param_count());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& s = spec.layer(l);
    const auto& p = layers[l];
    if (p.weights.size() != s.fan_in * s.fan_out || p.biases.size() != s.fan_out) {
      throw DimensionError("pack: layer " + std::to_string(l) + " has wrong shape");
    }
    std::copy(p.weights.begin(), p.weights.end(), flat.begin() + s.weight_offset);
    std::copy(p.biases.begin(), p.biases.end(), flat.begin() + s.bias_offset);
  }
  return ParamVector(std::move(flat));
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> flat(spec.param_count(), 0.0);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& s = spec.layer(l);
    const double scale = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
    for (std::size_t i = 0; i < s.fan_in * s.fan_out; ++i) {
      flat[s.weight_offset + i] = rng.uniform(-scale, scale);
    }
  }
  return ParamVector(std::move(flat));
}

void check_compatible(const MlpSpec& spec, const Dataset& data) {
  if (data.dim != spec.input_dim()) {
    throw DimensionError("feature dim " + std::to_string(data.dim) + " != input width " +
                         std::to_string(spec.input_dim()));
  }
  if (spec.loss_kind() == LossKind::softmax_cross_entropy) {
    if (data.num_classes == 0) {
      throw DimensionError("softmax_cross_entropy needs class labels");
    }
    if (data.num_classes != spec.output_dim()) {
      throw DimensionError("dataset has " + std::to_string(data.num_classes) +
                           " classes but output width is " + std::to_string(spec.output_dim()));
    }
  } else if (data.num_classes == 0 && spec.output_dim() != 1) {
    throw DimensionError("mse on scalar regression targets needs output width 1");
  } else if (data.num_classes > 0 && data.num_classes != spec.output_dim()) {
    throw DimensionError("mse on class labels needs output width == num_classes");
  }
}

namespace {

struct BatchView {
  std::size_t rows = 0;
  std::vector<double> x;       // rows x input_dim
  std::vector<double> labels;  // rows
};

BatchView gather(const MlpSpec& spec, std::span<const double> w, const Dataset& data,
                 const Batch& batch) {
  if (w.size() != spec.param_count()) {
    throw DimensionError("parameter vector has " + std::to_string(w.size()) + " entries, spec needs " +
                         std::to_string(spec.param_count()));
  }
  if (batch.indices.empty()) throw DimensionError("empty batch");
  check_compatible(spec, data);
  BatchView v;
  v.rows = batch.indices.size();
  v.x.reserve(v.rows * data.dim);
  v.labels.reserve(v.rows);
  for (std::size_t i : batch.indices) {
    if (i >= data.rows) throw DimensionError("batch index out of range");
    const auto r = data.row(i);
    v.x.insert(v.x.end(), r.begin(), r.end());
    v.labels.push_back(data.labels[i]);
  }
  return v;
}

// Pre- and post-activations per layer; post[0] is the input.
struct Trace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

Trace forward(const MlpSpec& spec, std::span<const double> w, const BatchView& v) {
  Trace t;
  t.post.push_back(v.x);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& s = spec.layer(l);
    std::vector<double> z(v.rows * s.fan_out);
    kernels::affine_forward(t.post.back(), v.rows, s.fan_in,
                            w.subspan(s.weight_offset, s.fan_in * s.fan_out),
                            w.subspan(s.bias_offset, s.fan_out), s.fan_out, z);
    if (l + 1 < spec.num_layers()) {
      std::vector<double> a(z.size());
      kernels::activate(spec.activation(), z, a);
      t.pre.push_back(std::move(z));
      t.post.push_back(std::move(a));
    } else {
      t.pre.push_back(std::move(z));
    }
  }
  return t;
}

std::vector<double> targets_for(const MlpSpec& spec, const BatchView& v, std::size_t num_classes) {
  const std::size_t width = spec.output_dim();
  std::vector<double> t(v.rows * width, 0.0);
  for (std::size_t r = 0; r < v.rows; ++r) {
    if (num_classes == 0) {
      t[r] = v.labels[r];
    } else {
      t[r * width + static_cast<std::size_t>(v.labels[r])] = 1.0;
    }
  }
  return t;
}

// Row losses and (optionally) d loss / d logits for the mean-reduced loss.
double output_loss(const MlpSpec& spec, const Trace& t, const BatchView& v,
                   std::size_t num_classes, std::vector<double>* d_logits) {
  const auto& logits = t.pre.back();
  const std::size_t width = spec.output_dim();
  const double scale = 1.0 / static_cast<double>(v.rows);
  std::vector<double> row_loss(v.rows);
  std::span<double> grad_out;
  if (d_logits) {
    d_logits->assign(logits.size(), 0.0);
    grad_out = *d_logits;
  }
  if (spec.loss_kind() == LossKind::softmax_cross_entropy) {
    kernels::softmax_cross_entropy(logits, v.rows, width, v.labels, scale, row_loss, grad_out);
  } else {
    const auto targets = targets_for(spec, v, num_classes);
    kernels::half_squared_error(logits, v.rows, width, targets, scale, row_loss, grad_out);
  }
  const double mean = compensated_sum(row_loss) * scale;
  if (!std::isfinite(mean)) throw NumericFailure("non-finite loss");
  return mean;
}

}  // namespace

double loss(const MlpSpec& spec, std::span<const double> w, const Dataset& data,
            const Batch& batch) {
  const auto v = gather(spec, w, data, batch);
  const auto t = forward(spec, w, v);
  return output_loss(spec, t, v, data.num_classes, nullptr);
}

double loss(const MlpSpec& spec, const ParamVector& params, const Dataset& data,
            const Batch& batch) {
  return loss(spec, params.values(), data, batch);
}

LossAndGradient loss_and_gradient(const MlpSpec& spec, std::span<const double> w,
                                  const Dataset& data, const Batch& batch) {
  const auto v = gather(spec, w, data, batch);
  const auto t = forward(spec, w, v);
  LossAndGradient out;
  std::vector<double> delta;
  out.loss = output_loss(spec, t, v, data.num_classes, &delta);
  out.gradient.assign(spec.param_count(), 0.0);
  std::span<double> g(out.gradient);

  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const auto& s = spec.layer(l);
    kernels::affine_weight_grad(t.post[l], v.rows, s.fan_in, delta, s.fan_out,
                                g.subspan(s.weight_offset, s.fan_in * s.fan_out),
                                g.subspan(s.bias_offset, s.fan_out));
    if (l == 0) break;
    std::vector<double> d_in(v.rows * s.fan_in);
    kernels::affine_input_grad(delta, v.rows, s.fan_out,
                               w.subspan(s.weight_offset, s.fan_in * s.fan_out), s.fan_in, d_in);
    kernels::activation_backward(spec.activation(), t.pre[l - 1], t.post[l], d_in);
    delta = std::move(d_in);
  }
  if (!all_finite(out.gradient)) throw NumericFailure("non-finite gradient");
  return out;
}

GradVector gradient(const MlpSpec& spec, const ParamVector& params, const Dataset& data,
                    const Batch& batch, std::int64_t step) {
  auto lg = loss_and_gradient(spec, params.values(), data, batch);
  return GradVector{std::move(lg.gradient), batch.batch_id, step};
}

std::vector<double> hidden_preactivations(const MlpSpec& spec, std::span<const double> w,
                                          const Dataset& data, const Batch& batch) {
  const auto v = gather(spec, w, data, batch);
  const auto t = forward(spec, w, v);
  std::vector<double> out;
  for (std::size_t l = 0; l + 1 < t.pre.size(); ++l) {
    out.insert(out.end(), t.pre[l].begin(), t.pre[l].end());
  }
  return out;
}

}  // namespace lockstep

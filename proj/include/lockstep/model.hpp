#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lockstep/data.hpp"
#include "lockstep/mlp.hpp"

namespace lockstep {

/// Anything that maps a flat parameter vector and a batch to a loss and its
/// gradient. Probe and sequential code run unchanged on MLPs and on the
/// closed-form surfaces. Implementations must be pure and safe to call
/// concurrently.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::size_t dim() const = 0;
  virtual double loss(std::span<const double> w, const Batch& batch) const = 0;

  /// The loss field must equal loss(w, batch) bitwise.
  virtual LossAndGradient loss_and_gradient(std::span<const double> w,
                                            const Batch& batch) const = 0;

  std::vector<double> gradient(std::span<const double> w, const Batch& batch) const {
    return loss_and_gradient(w, batch).gradient;
  }
};

/// MLP over a dataset. The dataset must outlive the model.
class MlpModel final : public LossModel {
 public:
  MlpModel(MlpSpec spec, const Dataset& data);

  const MlpSpec& spec() const { return spec_; }
  const Dataset& data() const { return *data_; }

  std::size_t dim() const override { return spec_.param_count(); }
  double loss(std::span<const double> w, const Batch& batch) const override;
  LossAndGradient loss_and_gradient(std::span<const double> w, const Batch& batch) const override;

 private:
  MlpSpec spec_;
  const Dataset* data_;
};

}  // namespace lockstep

#include "lockstep/model.hpp"

namespace lockstep {

MlpModel::MlpModel(MlpSpec spec, const Dataset& data) : spec_(std::move(spec)), data_(&data) {
  check_compatible(spec_, data);
}

double MlpModel::loss(std::span<const double> w, const Batch& batch) const {
  return lockstep::loss(spec_, w, *data_, batch);
}

LossAndGradient MlpModel::loss_and_gradient(std::span<const double> w, const Batch& batch) const {
  return lockstep::loss_and_gradient(spec_, w, *data_, batch);
}

}  // namespace lockstep

#pragma once

#include <span>
#include <vector>

#include "lockstep/data.hpp"
#include "lockstep/mlp.hpp"

// Serial per-example MLP evaluation, written independently of the batched
// OpenMP kernels. Tests and the kernel benchmark compare against it; the
// training path never calls it.
namespace lockstep::reference {

double loss(const MlpSpec& spec, std::span<const double> w, const Dataset& data,
            const Batch& batch);

std::vector<double> gradient(const MlpSpec& spec, std::span<const double> w,
                             const Dataset& data, const Batch& batch);

}  // namespace lockstep::reference

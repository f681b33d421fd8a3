#pragma once

#include <vector>

#include "tmac/model.hpp"

namespace tmac {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected adaptive-moment update of every parameter. `grads`
/// follows named_parameters order. Increments params.adam.step.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads, double lr,
               const AdamConfig& config = {});

}  // namespace tmac

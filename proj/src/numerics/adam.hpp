#pragma once

#include <cstdint>
#include <vector>

#include "numerics/tensor.hpp"

namespace histograph::numerics {

struct AdamState {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m;  // one per parameter, allocated on the first step
  std::vector<Tensor> v;
};

// One bias-corrected Adam update.  A null gradient pointer is treated as an
// all-zero gradient (the parameter still participates in the step count).
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state);

}  // namespace histograph::numerics

#pragma once

#include <vector>

#include "ssgnn/dense.hpp"

namespace ssgnn {

// Bias-corrected Adam. Weight decay is applied as an L2 term added to the
// gradient (grad += wd * param) before the moment updates, and only for
// parameters whose decay flag is set (weight matrices, not biases).
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void init(const std::vector<Matrix*>& params);
  bool initialized() const { return !m.empty(); }
};

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               const std::vector<bool>& apply_decay, AdamState& state, double lr,
               double weight_decay);

}  // namespace ssgnn

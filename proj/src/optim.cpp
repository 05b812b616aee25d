#include "ssgnn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ssgnn {

void AdamState::init(const std::vector<Matrix*>& params) {
  m.clear();
  v.clear();
  step_count = 0;
  for (const Matrix* p : params) {
    m.push_back(Matrix::Zero(p->rows(), p->cols()));
    v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               const std::vector<bool>& apply_decay, AdamState& state, double lr,
               double weight_decay) {
  if (params.size() != grads.size() || params.size() != apply_decay.size() ||
      params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state arity mismatch");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch at parameter " +
                                  std::to_string(i));
    }
    Matrix g = grads[i];
    if (apply_decay[i] && weight_decay != 0.0) g += weight_decay * p;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = (state.beta2 * state.v[i].array() + (1.0 - state.beta2) * g.array().square()).matrix();
    Matrix m_hat = state.m[i] / bc1;
    Matrix v_hat = state.v[i] / bc2;
    p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + state.eps);
    require_finite(p, "adam_step");
  }
}

}  // namespace ssgnn

#include "mobility/nn/adam.hpp"

#include "mobility/nn/kernels.hpp"

namespace mobility::nn {

void Adam::step(const std::vector<Parameter*>& params) {
  ++step_;
  for (Parameter* p : params) {
    if (p->m.empty()) p->m = Matrix(p->value.rows, p->value.cols);
    if (p->v.empty()) p->v = Matrix(p->value.rows, p->value.cols);
    if (p->grad.empty()) p->grad = Matrix(p->value.rows, p->value.cols);
    kernels::adam_update(p->value, p->grad, p->m, p->v, config_.lr, config_.beta1, config_.beta2, config_.eps, step_);
    p->zero_grad();
  }
}

}  // namespace mobility::nn

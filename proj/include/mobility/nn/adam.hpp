#pragma once

#include <vector>

#include "mobility/nn/matrix.hpp"

namespace mobility::nn {

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update from the accumulated gradients, then zeroes them.
  void step(const std::vector<Parameter*>& params);
  long steps_taken() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  long step_ = 0;
};

}  // namespace mobility::nn

#pragma once

#include <vector>

#include "l2g/tensor.hpp"

namespace l2g {

struct SgdOptions {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// SGD with momentum and L2 weight decay. Per parameter, per step:
//
//   v <- momentum * v + (g + weight_decay * p)
//   p <- p - lr * v
//
// Weight decay is folded into the gradient before the momentum update.
// A parameter whose gradient is absent this step (not reached by backward)
// is left untouched, including its momentum buffer.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, SgdOptions options);

  void step();
  void zero_grad();

  double lr() const { return options_.lr; }
  void set_lr(double lr) { options_.lr = lr; }
  const SgdOptions& options() const { return options_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::vector<double>>& momentum_buffers() const {
    return velocity_;
  }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  SgdOptions options_;
};

// Single update on explicit values; the rule used by Sgd::step.
void sgd_update(std::span<double> param, std::span<const double> grad,
                std::span<double> velocity, const SgdOptions& options);

}  // namespace l2g

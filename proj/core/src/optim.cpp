#include "l2g/optim.hpp"

#include "l2g/error.hpp"

namespace l2g {

void sgd_update(std::span<double> param, std::span<const double> grad,
                std::span<double> velocity, const SgdOptions& options) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw ShapeError("sgd_update: parameter/gradient/momentum sizes " +
                     std::to_string(param.size()) + "/" +
                     std::to_string(grad.size()) + "/" +
                     std::to_string(velocity.size()) + " differ");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = options.momentum * velocity[i] + grad[i] +
                  options.weight_decay * param[i];
    param[i] -= options.lr * velocity[i];
  }
}

Sgd::Sgd(std::vector<Tensor> params, SgdOptions options)
    : options_(options) {
  // Shared parameters appear once.
  for (auto& p : params) {
    bool dup = false;
    for (const auto& q : params_) dup = dup || q.same_storage(p);
    if (!dup) params_.push_back(p);
  }
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void Sgd::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    sgd_update(p.mutable_data(), p.grad(), velocity_[i], options_);
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace l2g

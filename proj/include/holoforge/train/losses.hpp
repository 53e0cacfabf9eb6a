#pragma once

#include <stdexcept>
#include <string>

#include "holoforge/tensor/ops.hpp"

namespace holoforge::train {

struct LossConfig {
  double a1 = 0.01;  // weight of (1 - SSIM) in phase 1
  double a2 = 0.01;  // weight of the L1 terms in phase 2

  void validate() const {
    if (!(a1 >= 0) || !(a2 >= 0)) throw std::invalid_argument("loss coefficients must be >= 0");
  }
};

/// MSE(pred, gt) + a1 * (1 - SSIM(pred, gt)).
template <class T>
Tensor<T> loss_phase1(const Tensor<T>& pred_depth, const Tensor<T>& gt_depth, const LossConfig& cfg = {}) {
  Tensor<T> l = mse_loss(pred_depth, gt_depth);
  if (cfg.a1 == 0) return l;
  return add(l, affine(ssim(pred_depth, gt_depth), T(-cfg.a1), T(cfg.a1)));
}

/// [MSE(A', A) + MSE(p', p)] + a2 * [L1(A', A) + L1(p', p)].
template <class T>
Tensor<T> loss_phase2(const Tensor<T>& pred_amp, const Tensor<T>& pred_phase, const Tensor<T>& gt_amp,
                      const Tensor<T>& gt_phase, const LossConfig& cfg = {}) {
  Tensor<T> l = add(mse_loss(pred_amp, gt_amp), mse_loss(pred_phase, gt_phase));
  if (cfg.a2 == 0) return l;
  return add(l, affine(add(l1_loss(pred_amp, gt_amp), l1_loss(pred_phase, gt_phase)), T(cfg.a2), T(0)));
}

}  // namespace holoforge::train

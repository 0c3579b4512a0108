#pragma once

#include "fbwm/tensor.hpp"

namespace fbwm::optim {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

enum class StepStatus { Ok, NonFiniteGradient };

// Bias-corrected Adam on every parameter's accumulated gradient. A non-finite
// gradient leaves the store untouched and reports NonFiniteGradient.
StepStatus adam_update(tensor::ParamStore& store, const AdamConfig& config);

double global_grad_norm(const tensor::ParamStore& store);

// Rescales all gradients so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_global_norm(tensor::ParamStore& store, double max_norm);

}  // namespace fbwm::optim

#include "fbwm/optim.hpp"

#include <cmath>

namespace fbwm::optim {

StepStatus adam_update(tensor::ParamStore& store, const AdamConfig& config)
{
    for (const auto& p : store) {
        if (!p.grad.allFinite()) return StepStatus::NonFiniteGradient;
    }
    ++store.step;
    const double t = static_cast<double>(store.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (auto& p : store) {
        p.m = config.beta1 * p.m + (1.0 - config.beta1) * p.grad;
        p.v = config.beta2 * p.v + (1.0 - config.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= config.lr * (p.m.array() / correction1) /
                           ((p.v.array() / correction2).sqrt() + config.eps);
    }
    return StepStatus::Ok;
}

double global_grad_norm(const tensor::ParamStore& store)
{
    double sq = 0.0;
    for (const auto& p : store) sq += p.grad.squaredNorm();
    return std::sqrt(sq);
}

double clip_global_norm(tensor::ParamStore& store, double max_norm)
{
    const double norm = global_grad_norm(store);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& p : store) p.grad *= scale;
    }
    return norm;
}

}  // namespace fbwm::optim

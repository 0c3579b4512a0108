#pragma once

#include <span>
#include <string>

namespace fbwm::eval {

inline constexpr int kSpikeWindow = 20;
inline constexpr double kSpikeFactor = 10.0;

struct DivergenceVerdict {
    bool diverged = false;
    int epoch = 0;  // 1-based first offending epoch, 0 when not diverged
    std::string reason;
};

// Scans per-epoch mean training losses (index 0 is epoch 1). Epoch e diverges
// when its loss is non-finite, or when e > 20 and the loss exceeds the median
// of the previous 20 epochs by more than 9 * |median| (which is the
// "10x the running median" rule for positive medians and stays meaningful
// when an NLL-based loss goes negative). `params_finite` reports the state
// of the parameters after the last epoch in the history.
DivergenceVerdict detect_divergence(std::span<const double> epoch_losses, bool params_finite = true);

}  // namespace fbwm::eval

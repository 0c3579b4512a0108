#include "fbwm/eval/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fbwm::eval {

namespace {

double median(std::vector<double> v)
{
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

DivergenceVerdict detect_divergence(std::span<const double> losses, bool params_finite)
{
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const int epoch = static_cast<int>(i) + 1;
        if (!std::isfinite(losses[i])) {
            return {true, epoch, "non-finite loss"};
        }
        if (epoch > kSpikeWindow) {
            std::vector<double> window(losses.begin() + static_cast<std::ptrdiff_t>(i) - kSpikeWindow,
                                       losses.begin() + static_cast<std::ptrdiff_t>(i));
            const double med = median(std::move(window));
            if (losses[i] > med + (kSpikeFactor - 1.0) * std::abs(med)) {
                return {true, epoch, "loss spike above running median"};
            }
        }
    }
    if (!params_finite && !losses.empty()) {
        return {true, static_cast<int>(losses.size()), "non-finite parameters"};
    }
    return {};
}

}  // namespace fbwm::eval

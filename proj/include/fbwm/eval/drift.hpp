#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fbwm/worldmodel.hpp"

namespace fbwm::eval {

inline constexpr int kNoCutoff = std::numeric_limits<int>::max();

// Per-step NLL of the true next latent z_{t+1}, t = 0 .. n-2. Inputs are the
// true latents for t < cutoff; from t = cutoff on, the model is fed a sample
// drawn from its own previous prediction. Actions are always the recorded ones.
// Closed-loop steps stop after `horizon` steps; later entries keep their
// teacher-forced values.
std::vector<double> closed_loop_nll(const wm::WorldModel& model, const wm::LatentEpisode& ep, int cutoff,
                                    std::mt19937_64& rng, int horizon = kNoCutoff);

struct DriftPoint {
    int t = 0;
    int episodes = 0;  // episodes long enough to reach t
    double mean_nll = 0.0;
    double sd_nll = 0.0;
    double mean_open = 0.0;  // same episodes, teacher-forced throughout
    double sd_open = 0.0;
};

struct DriftCurve {
    int cutoff = 0;
    std::vector<DriftPoint> points;  // t = cutoff, cutoff + 1, ...
};

// Episode i uses its own sampling stream derived from (seed, i), so results do
// not depend on evaluation order.
DriftCurve drift_experiment(const wm::WorldModel& model, const std::vector<const wm::LatentEpisode*>& episodes,
                            int cutoff, std::uint64_t seed, int horizon = kNoCutoff);

// Mean over the first `steps` post-cutoff points of (closed-loop - open-loop)
// NLL: the excess loss caused by feeding back the model's own samples.
double drift_growth(const DriftCurve& curve, int steps = 20);

}  // namespace fbwm::eval

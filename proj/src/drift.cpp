#include "fbwm/eval/drift.hpp"

#include <algorithm>
#include <cmath>

namespace fbwm::eval {

std::vector<double> closed_loop_nll(const wm::WorldModel& model, const wm::LatentEpisode& ep, int cutoff,
                                    std::mt19937_64& rng, int horizon)
{
    if (cutoff < 1) throw std::invalid_argument("drift: cutoff must be >= 1");
    const tensor::Index steps = ep.length() - 1;
    if (steps < 1) return {};
    // Steps before the cutoff are ordinary teacher-forced predictions.
    std::vector<double> nll = wm::teacher_forced_nll(model, ep);
    if (cutoff >= steps) return nll;

    nn::LstmState state = nn::LstmState::zeros(model.hidden);
    tensor::Vector fed_back;
    const tensor::Index stop =
        horizon == kNoCutoff ? steps : std::min<tensor::Index>(steps, static_cast<tensor::Index>(cutoff) + horizon);
    for (tensor::Index t = 0; t < stop; ++t) {
        const tensor::Vector input = t < cutoff ? tensor::Vector(ep.mu.col(t)) : fed_back;
        const env::Action a = ep.actions[t] > 0.5 ? env::Action::Flap : env::Action::Noop;
        const wm::StepOutput out = wm::wm_step(model, input, a, state);
        if (t >= cutoff) nll[static_cast<std::size_t>(t)] = wm::mdn_nll(out.mixture, ep.mu.col(t + 1));
        if (t + 1 >= cutoff) fed_back = wm::sample_next_latent(out.mixture, rng);
        state = out.hidden;
    }
    return nll;
}

DriftCurve drift_experiment(const wm::WorldModel& model, const std::vector<const wm::LatentEpisode*>& episodes,
                            int cutoff, std::uint64_t seed, int horizon)
{
    std::vector<std::vector<double>> closed(episodes.size()), open(episodes.size());
    std::size_t longest = 0;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (i + 1));
        closed[i] = closed_loop_nll(model, *episodes[i], cutoff, rng, horizon);
        open[i] = episodes[i]->length() > 1 ? wm::teacher_forced_nll(model, *episodes[i]) : std::vector<double>{};
        longest = std::max(longest, closed[i].size());
    }
    DriftCurve curve;
    curve.cutoff = cutoff;
    std::size_t end = longest;
    if (horizon != kNoCutoff) end = std::min(end, static_cast<std::size_t>(cutoff) + static_cast<std::size_t>(horizon));
    for (std::size_t t = static_cast<std::size_t>(cutoff); t < end; ++t) {
        DriftPoint p;
        p.t = static_cast<int>(t);
        double s = 0, ss = 0, so = 0, sso = 0;
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            if (closed[i].size() <= t) continue;
            ++p.episodes;
            s += closed[i][t];
            ss += closed[i][t] * closed[i][t];
            so += open[i][t];
            sso += open[i][t] * open[i][t];
        }
        if (p.episodes == 0) continue;
        const double n = p.episodes;
        p.mean_nll = s / n;
        p.mean_open = so / n;
        p.sd_nll = std::sqrt(std::max(0.0, ss / n - p.mean_nll * p.mean_nll));
        p.sd_open = std::sqrt(std::max(0.0, sso / n - p.mean_open * p.mean_open));
        curve.points.push_back(p);
    }
    return curve;
}

double drift_growth(const DriftCurve& curve, int steps)
{
    double sum = 0.0;
    int n = 0;
    for (const auto& p : curve.points) {
        if (p.t >= curve.cutoff + steps) break;
        sum += p.mean_nll - p.mean_open;
        ++n;
    }
    return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace fbwm::eval

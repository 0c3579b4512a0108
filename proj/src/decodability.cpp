#include "fbwm/eval/decodability.hpp"

#include <algorithm>

namespace fbwm::eval {

ProbeData collect_probe_data(const wm::WorldModel& model, const std::vector<const wm::LatentEpisode*>& episodes)
{
    tensor::Index rows = 0;
    for (const auto* ep : episodes) rows += std::max<tensor::Index>(ep->length() - 1, 0);
    ProbeData data;
    data.states.resize(rows, model.hidden);
    data.features.resize(rows, env::kNumFeatures);
    tensor::Index r = 0;
    for (const auto* ep : episodes) {
        const tensor::Index t_max = ep->length() - 1;
        if (t_max < 1) continue;
        data.states.middleRows(r, t_max) = wm::hidden_states(model, *ep).transpose();
        data.features.middleRows(r, t_max) = ep->features.leftCols(t_max).transpose();
        r += t_max;
    }
    return data;
}

DecodabilityReport decodability_report(const wm::WorldModel& model, const wm::WorldModel& untrained,
                                       const std::vector<const wm::LatentEpisode*>& episodes,
                                       std::optional<double> reg)
{
    if (model.hidden != untrained.hidden) {
        throw std::invalid_argument("decodability_report: untrained twin must share the architecture");
    }
    std::vector<const wm::LatentEpisode*> fit_eps, eval_eps;
    for (std::size_t i = 0; i < episodes.size(); ++i) (i % 2 == 0 ? fit_eps : eval_eps).push_back(episodes[i]);

    const ProbeData fit_m = collect_probe_data(model, fit_eps);
    const ProbeData eval_m = collect_probe_data(model, eval_eps);
    const ProbeData fit_b = collect_probe_data(untrained, fit_eps);
    const ProbeData eval_b = collect_probe_data(untrained, eval_eps);

    DecodabilityReport report;
    report.fit_rows = static_cast<std::size_t>(fit_m.states.rows());
    report.eval_rows = static_cast<std::size_t>(eval_m.states.rows());
    for (int k = 0; k < env::kNumFeatures; ++k) {
        FeatureDecodability f;
        f.feature = k;
        f.name = env::feature_name(k);
        f.trained_feature = std::find(wm::kProbeFeatures.begin(), wm::kProbeFeatures.end(), k) != wm::kProbeFeatures.end();
        f.model = fit_posthoc_probe(fit_m.states, fit_m.features.col(k), eval_m.states, eval_m.features.col(k), reg);
        f.baseline = fit_posthoc_probe(fit_b.states, fit_b.features.col(k), eval_b.states, eval_b.features.col(k), reg);
        report.features.push_back(std::move(f));
    }
    return report;
}

}  // namespace fbwm::eval

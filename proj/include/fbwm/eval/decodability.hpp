#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbwm/eval/probe.hpp"
#include "fbwm/worldmodel.hpp"

namespace fbwm::eval {

// Teacher-forced hidden states and the aligned world features: row r holds
// h_t and f_t for one step t < n - 1 of one episode.
struct ProbeData {
    Matrix states;    // N x H
    Matrix features;  // N x kNumFeatures
};

ProbeData collect_probe_data(const wm::WorldModel& model, const std::vector<const wm::LatentEpisode*>& episodes);

struct FeatureDecodability {
    int feature = 0;
    std::string name;
    bool trained_feature = false;  // part of the probe loss
    ProbeFit model;
    ProbeFit baseline;  // untrained twin
};

struct DecodabilityReport {
    std::vector<FeatureDecodability> features;
    std::size_t fit_rows = 0;
    std::size_t eval_rows = 0;
};

// Splits the episodes alternately into fit and held-out halves, then fits a
// post-hoc ridge probe per world feature on both models' hidden states.
// Neither model is modified.
DecodabilityReport decodability_report(const wm::WorldModel& model, const wm::WorldModel& untrained,
                                       const std::vector<const wm::LatentEpisode*>& episodes,
                                       std::optional<double> reg = std::nullopt);

}  // namespace fbwm::eval

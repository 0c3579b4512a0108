#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fbwm/worldmodel.hpp"

namespace fbwm::eval {

struct RunKey {
    double lambda = 0.0;
    int hidden = 64;
    std::uint64_t seed = 0;

    auto operator<=>(const RunKey&) const = default;
};

// File-name stem such as "l64_h128_s3".
std::string run_tag(const RunKey& key);

struct RunRecord {
    RunKey key;
    wm::WmTrainResult result;

    bool diverged() const { return result.diverged; }
    int epochs_run() const { return static_cast<int>(result.metrics.size()); }
    // Metrics of the last completed epoch; NaN losses when the run diverged.
    double final_test_loss() const;
    double final_train_loss() const;
};

struct SweepGrid {
    std::vector<double> lambdas;
    std::vector<int> hidden_sizes;
    std::vector<std::uint64_t> seeds;

    // Keys ordered by (lambda, hidden, seed) in the order given.
    std::vector<RunKey> keys() const;
};

struct SweepData {
    const std::vector<wm::LatentEpisode>* train = nullptr;
    const std::vector<wm::LatentEpisode>* test_expert = nullptr;
    const std::vector<wm::LatentEpisode>* test_random = nullptr;
};

// Trains one model per grid key on up to `jobs` threads. `base` supplies
// everything except lambda, hidden and seed. Records come back in key order;
// on_done is called under a lock as each run finishes.
std::vector<RunRecord> run_sweep(const SweepData& data, const SweepGrid& grid, const wm::WmTrainConfig& base, int jobs,
                                 const std::function<void(const RunRecord&)>& on_done = {});

struct LambdaSummary {
    double lambda = 0.0;
    int hidden = 0;
    int runs = 0;
    int diverged = 0;
    double mean_test = 0.0;
    double sd_test = 0.0;  // sample s.d., NaN with fewer than two survivors
    double median_test = 0.0;
    double mean_train = 0.0;
    double sd_train = 0.0;
    double median_train = 0.0;
};

// One row per (lambda, hidden) in key order. Diverged runs are counted but
// excluded from the statistics.
std::vector<LambdaSummary> summarize_lambda(const std::vector<RunRecord>& records);

struct ScalingRow {
    RunKey key;
    bool diverged = false;
    int mid_epoch = 0;
    double mid_test_loss = 0.0;
    int final_epoch = 0;
    double final_test_loss = 0.0;
};

// Test loss at the half-way epoch and at the last epoch of every run.
std::vector<ScalingRow> scaling_table(const std::vector<RunRecord>& records, int planned_epochs);

struct StabilityGroup {
    double lambda = 0.0;
    int hidden = 0;
    int seeds = 0;
    int survived = 0;
    int final_epoch = 0;
    std::vector<int> divergence_epochs;  // ascending

    double survival_fraction() const { return seeds > 0 ? static_cast<double>(survived) / seeds : 0.0; }
};

std::vector<StabilityGroup> stability_report(const std::vector<RunRecord>& records, int planned_epochs);

double median(std::vector<double> values);
double sample_sd(const std::vector<double>& values);

}  // namespace fbwm::eval

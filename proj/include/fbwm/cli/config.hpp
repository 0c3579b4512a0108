#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbwm/autoencoder.hpp"
#include "fbwm/env.hpp"
#include "fbwm/worldmodel.hpp"

namespace fbwm::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RolloutSettings {
    int train_episodes = 1000;
    int test_expert_episodes = 200;
    int test_random_episodes = 200;
    std::uint64_t train_seed = 0;
    std::uint64_t test_expert_seed = 1'000'000;
    std::uint64_t test_random_seed = 2'000'000;
    int max_length = 1000;
    double epsilon = 0.01;
    double p_flap = 0.075;
    double margin = 15.0;
};

struct EvalSettings {
    std::vector<double> lambdas = {0.0, 64.0};
    std::vector<int> hidden_sizes = {64};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<int> cutoffs = {10, 35, 60};
    int drift_steps = 20;
    std::uint64_t drift_seed = 0;
    std::uint64_t baseline_seed = 1'000'003;
    int baselines = 1;
    double probe_reg = -1.0;  // negative: scale-aware default
};

// Every tunable of a pipeline run. Sections: [env], [rollout],
// [autoencoder], [worldmodel], [eval], [cli].
struct RunConfig {
    env::EnvConfig env;
    RolloutSettings rollout;
    ae::AeTrainConfig autoencoder{.epochs = 20, .max_samples = 100'000};
    wm::WmTrainConfig worldmodel;
    EvalSettings eval;
    std::string out = "runs";
    int jobs = 0;  // 0: one per logical CPU

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    void validate() const;

    // Canonical INI form listing every key; parse(to_ini()) == *this.
    std::string to_ini() const;

    // Digest over the named sections of the canonical form.
    std::uint64_t digest(std::initializer_list<const char*> sections) const;
    std::uint64_t digest() const;  // all sections except [cli]
    std::uint64_t data_digest() const { return digest({"env", "rollout"}); }
    std::uint64_t autoencoder_digest() const { return digest({"env", "rollout", "autoencoder"}); }
    std::uint64_t worldmodel_digest() const { return digest({"env", "rollout", "autoencoder", "worldmodel"}); }
};

}  // namespace fbwm::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbwm/env.hpp"

namespace fbwm::rollout {

using env::Action;

enum class PolicyTag : std::uint8_t { Expert = 0, Random = 1 };
enum class Split : std::uint8_t { Train = 0, TestExpert = 1, TestRandom = 2 };

const char* to_string(PolicyTag p);
const char* to_string(Split s);

// One trajectory. Row t holds the observation and features of state t, the
// action chosen in state t, and end flag 1 on the final row only. The final
// row's action is never executed and is stored as NOOP.
struct Episode {
    std::vector<float> observations;  // length() * kLidarRays
    std::vector<Action> actions;
    std::vector<float> features;  // length() * kNumFeatures
    std::vector<std::uint8_t> end_flags;
    PolicyTag policy = PolicyTag::Expert;
    std::uint64_t seed = 0;

    std::size_t length() const { return actions.size(); }
    const float* observation(std::size_t t) const { return observations.data() + t * env::kLidarRays; }
    const float* feature_row(std::size_t t) const { return features.data() + t * env::kNumFeatures; }

    // Throws std::logic_error describing the first violated invariant.
    void check() const;

    bool operator==(const Episode&) const = default;
};

struct RolloutDataset {
    std::vector<Episode> episodes;
    Split split = Split::Train;
    std::uint64_t env_config_digest = 0;

    std::size_t total_steps() const;
    bool operator==(const RolloutDataset&) const = default;
};

struct PolicySpec {
    PolicyTag tag = PolicyTag::Expert;
    double epsilon = 0.01;      // expert: per-step chance of acting randomly
    double p_flap = 0.075;      // random policy / random-switch flap probability
    double margin = 15.0;       // expert: px below the gap center that triggers a flap
};

Action random_policy(std::mt19937_64& rng, double p_flap);

// Scripted gap tracker standing in for a trained expert. Flaps when the
// player's y after one more gravity step would sit more than `margin` px
// below the next pipe's gap center. With probability epsilon the step is
// instead delegated to random_policy(p_flap).
class HeuristicExpert {
public:
    HeuristicExpert(const env::EnvConfig& config, double margin, double p_flap = 0.075);

    Action operator()(const env::WorldFeatures& features, std::mt19937_64& rng, double epsilon) const;

private:
    env::EnvConfig config_;
    env::FeatureScale scale_;
    double margin_;
    double p_flap_;
};

struct CollectOptions {
    int n_episodes = 1;
    std::uint64_t base_seed = 0;
    int max_length = 1000;
    int jobs = 1;
};

// Runs a single episode from `seed` (env reset seed; the policy stream is
// derived from it).
Episode run_episode(const env::EnvConfig& config, const PolicySpec& policy, std::uint64_t seed, int max_length);

RolloutDataset collect(const env::EnvConfig& config, const PolicySpec& policy, Split split,
                       const CollectOptions& options);

// True when replaying the stored actions from the stored seed reproduces the
// stored observations, features and end flag exactly.
bool replays(const Episode& episode, const env::EnvConfig& config, int max_length);

// --- persistence ----------------------------------------------------------

enum class DatasetErrorCode { Io, BadMagic, VersionMismatch, Truncated, Corrupt };

struct DatasetError : std::runtime_error {
    DatasetError(DatasetErrorCode c, const std::string& what) : std::runtime_error(what), code(c) {}
    DatasetErrorCode code;
};

inline constexpr std::uint16_t kDatasetVersion = 1;

struct LoadResult {
    RolloutDataset dataset;
    bool digest_mismatch = false;  // only meaningful when an expected digest was given
};

void save_dataset(const RolloutDataset& dataset, const std::filesystem::path& path);
LoadResult load_dataset(const std::filesystem::path& path, std::uint64_t expected_digest = 0);

}  // namespace fbwm::rollout

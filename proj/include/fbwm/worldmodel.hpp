#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fbwm/autoencoder.hpp"
#include "fbwm/checkpoint.hpp"
#include "fbwm/nn.hpp"
#include "fbwm/rollout.hpp"

namespace fbwm::wm {

using tensor::Index;
using tensor::Matrix;
using tensor::Vector;

inline constexpr int kComponents = 5;
inline constexpr int kLatentDim = ae::kLatentDim;
inline constexpr int kInputDim = kLatentDim + 1;
inline constexpr int kHeadDim = 2 * kComponents * kLatentDim + 1;
inline constexpr double kFlagWeight = 10.0;

// World features the probe is trained on: player y, vy and rotation.
inline constexpr std::array<int, 3> kProbeFeatures = {0, 1, 2};
inline constexpr int kNumProbes = static_cast<int>(kProbeFeatures.size());

struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Uniformly weighted mixture of diagonal Gaussians. Column i of each matrix
// belongs to component i (kLatentDim x kComponents).
struct MixtureParams {
    Matrix mu;
    Matrix sigma;
};

struct WorldModel {
    int hidden = 0;
    double lambda = 0.0;
    tensor::ParamStore store;
    nn::Lstm lstm;
    nn::Linear head;                  // H -> 40 means, 40 log-sigmas, 1 end-flag logit
    std::optional<nn::Linear> probe;  // H -> kNumProbes, present iff lambda > 0 at creation

    // Zero-initialized parameters.
    WorldModel(int hidden, double lambda);
    static WorldModel create(int hidden, double lambda, std::uint64_t seed);

    checkpoint::Checkpoint to_checkpoint() const;
    static WorldModel from_checkpoint(const checkpoint::Checkpoint& ck);
};

struct StepOutput {
    MixtureParams mixture;
    double end_flag = 0.0;
    nn::LstmState hidden;
};

Vector step_input(const Vector& z, env::Action a);

StepOutput wm_step(const WorldModel& model, const Vector& z, env::Action a, const nn::LstmState& state);

struct MdnGradient {
    Matrix d_mu;         // kLatentDim x kComponents
    Matrix d_log_sigma;  // kLatentDim x kComponents
    Vector d_z;
};

// -log((1/5) sum_i N(z; mu_i, diag(exp(log_sigma_i))^2)) via log-sum-exp.
// Returns NaN when any input is non-finite.
double mdn_nll(const Eigen::Ref<const Matrix>& mu, const Eigen::Ref<const Matrix>& log_sigma,
               const Eigen::Ref<const Vector>& z, MdnGradient* grad = nullptr);

double mdn_nll(const MixtureParams& mixture, const Vector& z);

// Picks a component uniformly, then draws from its diagonal Gaussian.
Vector sample_next_latent(const MixtureParams& mixture, std::mt19937_64& rng);

// An episode mapped through the frozen encoder.
struct LatentEpisode {
    Matrix mu;         // kLatentDim x n
    Matrix sigma;      // kLatentDim x n
    Vector actions;    // n, 0 = NOOP, 1 = FLAP
    Matrix features;   // kNumFeatures x n
    Vector end_flags;  // n
    rollout::PolicyTag policy = rollout::PolicyTag::Expert;

    Index length() const { return actions.size(); }
};

LatentEpisode encode_episode(const ae::AutoencoderModel& model, const rollout::Episode& episode);
std::vector<LatentEpisode> encode_dataset(const ae::AutoencoderModel& model, const rollout::RolloutDataset& dataset);

struct EpisodeLosses {
    double nll = 0.0;         // mean per-step mixture NLL
    double flag = 0.0;        // 10/T * sum of squared end-flag errors
    double predictive = 0.0;  // nll + flag
    double probe = 0.0;       // 1/T * sum over steps and probed features of squared errors
    double total = 0.0;       // predictive, plus lambda * probe when lambda > 0
};

// Forward pass over an episode of n >= 2 steps: inputs (z_t, a_t) for
// t < n - 1, targets z_{t+1} and e_{t+1}. `z` overrides ep.mu as the latent
// sequence (inputs and targets) when given.
EpisodeLosses episode_losses(const WorldModel& model, const LatentEpisode& ep, const Matrix* z = nullptr);

// Same losses; accumulates gradients of `total` into model.store.
EpisodeLosses episode_loss_and_grad(WorldModel& model, const LatentEpisode& ep, const Matrix* z = nullptr);

double predictive_loss(const WorldModel& model, const LatentEpisode& ep);
// Per-step mixture NLL of z_{t+1}, t = 0 .. n-2, from the same pass that
// produces predictive_loss.
std::vector<double> teacher_forced_nll(const WorldModel& model, const LatentEpisode& ep);

double probe_loss(const WorldModel& model, const LatentEpisode& ep);
double total_loss(const WorldModel& model, const LatentEpisode& ep);

// Hidden outputs h_t (H x (n-1)) from teacher-forced inputs.
Matrix hidden_states(const WorldModel& model, const LatentEpisode& ep);

struct WmTrainConfig {
    int hidden = 64;
    double lambda = 0.0;
    int epochs = 100;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;
    bool sample_latents = false;
};

struct EpochMetrics {
    int epoch = 0;
    double train_pred_loss = 0.0;
    double train_probe_loss = 0.0;
    double test_pred_loss = 0.0;  // pooled over both test sets
    double test_pred_expert = 0.0;
    double test_pred_random = 0.0;
    bool diverged = false;
};

struct WmTrainResult {
    WorldModel model;
    std::vector<EpochMetrics> metrics;
    bool diverged = false;
    int divergence_epoch = 0;
    std::string divergence_reason;
};

// Mean predictive loss over episodes; NaN for an empty set.
double mean_predictive_loss(const WorldModel& model, const std::vector<LatentEpisode>& episodes);

// One optimizer step per episode in a seeded shuffled order each epoch, with
// global-norm clipping. Stops early with a divergence record instead of
// throwing.
WmTrainResult train_worldmodel(const std::vector<LatentEpisode>& train, const std::vector<LatentEpisode>& test_expert,
                               const std::vector<LatentEpisode>& test_random, const WmTrainConfig& config,
                               const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace fbwm::wm

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fbwm/checkpoint.hpp"
#include "fbwm/env.hpp"
#include "fbwm/nn.hpp"
#include "fbwm/rollout.hpp"

namespace fbwm::ae {

using tensor::Matrix;
using tensor::Vector;

inline constexpr int kLatentDim = 8;
inline constexpr int kObsDim = env::kLidarRays;

struct LatentGaussian {
    Vector mu;     // kLatentDim
    Vector sigma;  // kLatentDim, strictly positive
};

struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

struct DivergenceError : std::runtime_error {
    DivergenceError(int e, const std::string& what) : std::runtime_error(what), epoch(e) {}
    int epoch;
};

// Encoder 180-128-64-16 emitting (mu, s) with sigma = exp(s); decoder
// 8-64-128-180. Hidden layers use tanh, outputs are linear.
class AutoencoderModel {
public:
    // All parameters zero.
    AutoencoderModel();
    static AutoencoderModel create(std::uint64_t seed);

    tensor::ParamStore store;
    nn::Mlp encoder;
    nn::Mlp decoder;

    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    checkpoint::Checkpoint to_checkpoint(std::uint64_t env_digest) const;
    // The returned model is frozen.
    static AutoencoderModel from_checkpoint(const checkpoint::Checkpoint& ck);

private:
    bool frozen_ = false;
};

LatentGaussian encode(const AutoencoderModel& model, std::span<const double> x);

struct EncodedBatch {
    Matrix mu;         // 8 x B
    Matrix log_sigma;  // 8 x B (the raw s outputs)
};

EncodedBatch encode_batch(const AutoencoderModel& model, const Matrix& x, nn::MlpCache* cache = nullptr);

// z = mu + sigma * eta with eta ~ N(0, I).
Vector sample_latent(const LatentGaussian& latent, std::mt19937_64& rng);

Vector decode(const AutoencoderModel& model, const Vector& z);

// Reconstruction sum of squares through z = mu + exp(s) * noise plus
// 0.5 * ||(mu, s)||^2, each summed per sample and averaged over the batch.
// `noise` is 8 x B. The two parts are returned separately as well.
struct AeLoss {
    double total = 0.0;
    double reconstruction = 0.0;
    double regularizer = 0.0;
};

AeLoss ae_loss(const AutoencoderModel& model, const Matrix& x, const Matrix& noise);

// Same value; also accumulates parameter gradients. Rejects frozen models.
AeLoss ae_loss_and_grad(AutoencoderModel& model, const Matrix& x, const Matrix& noise);

struct AeTrainConfig {
    int epochs = 10;
    int batch_size = 128;
    double lr = 1e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    std::size_t max_samples = 0;  // 0: use every observation
};

struct AeEpochStats {
    int epoch = 0;
    double loss = 0.0;
    double reconstruction = 0.0;
};

struct AeTrainResult {
    AutoencoderModel model;
    std::vector<AeEpochStats> curve;
};

// Stacks observations of every episode into a 180 x N matrix, optionally
// subsampled (without replacement, seeded) to at most max_samples columns.
Eigen::MatrixXf gather_observations(const std::vector<const rollout::RolloutDataset*>& datasets,
                                    std::size_t max_samples, std::uint64_t seed);

// Minibatch Adam on ae_loss; throws DivergenceError on a non-finite loss or
// gradient. The returned model is frozen.
AeTrainResult train_autoencoder(const Eigen::MatrixXf& observations, const AeTrainConfig& config,
                                const std::function<void(const AeEpochStats&)>& on_epoch = {});

}  // namespace fbwm::ae

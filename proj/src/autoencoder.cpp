#include "fbwm/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fbwm/optim.hpp"

namespace fbwm::ae {

AutoencoderModel::AutoencoderModel()
{
    encoder = nn::Mlp::create(store, "encoder", {kObsDim, 128, 64, 2 * kLatentDim});
    decoder = nn::Mlp::create(store, "decoder", {kLatentDim, 64, 128, kObsDim});
}

AutoencoderModel AutoencoderModel::create(std::uint64_t seed)
{
    AutoencoderModel m;
    std::mt19937_64 rng(seed);
    nn::init_uniform(m.store, m.encoder, rng);
    nn::init_uniform(m.store, m.decoder, rng);
    return m;
}

checkpoint::Checkpoint AutoencoderModel::to_checkpoint(std::uint64_t env_digest) const
{
    checkpoint::Checkpoint ck;
    ck.kind = "autoencoder";
    ck.attributes["env_digest"] = std::to_string(env_digest);
    ck.attributes["latent_dim"] = std::to_string(kLatentDim);
    ck.add_params(store);
    return ck;
}

AutoencoderModel AutoencoderModel::from_checkpoint(const checkpoint::Checkpoint& ck)
{
    if (ck.kind != "autoencoder") {
        throw checkpoint::CheckpointError(checkpoint::CheckpointErrorCode::Mismatch,
                                          "expected an autoencoder checkpoint, got " + ck.kind);
    }
    AutoencoderModel m;
    ck.restore_params(m.store);
    m.freeze();
    return m;
}

EncodedBatch encode_batch(const AutoencoderModel& model, const Matrix& x, nn::MlpCache* cache)
{
    const Matrix raw = nn::mlp_forward(model.store, model.encoder, x, cache);
    return {raw.topRows(kLatentDim), raw.bottomRows(kLatentDim)};
}

LatentGaussian encode(const AutoencoderModel& model, std::span<const double> x)
{
    if (x.size() != static_cast<std::size_t>(kObsDim)) throw tensor::ShapeError("encode: expected 180 inputs");
    const Matrix in = Eigen::Map<const Vector>(x.data(), kObsDim);
    const EncodedBatch e = encode_batch(model, in);
    return {e.mu.col(0), e.log_sigma.col(0).array().exp().matrix()};
}

Vector sample_latent(const LatentGaussian& latent, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    Vector z(latent.mu.size());
    for (tensor::Index j = 0; j < z.size(); ++j) z[j] = latent.mu[j] + latent.sigma[j] * normal(rng);
    return z;
}

Vector decode(const AutoencoderModel& model, const Vector& z)
{
    return nn::mlp_forward(model.store, model.decoder, z).col(0);
}

namespace {

struct Forward {
    nn::MlpCache enc_cache;
    nn::MlpCache dec_cache;
    EncodedBatch latent;
    Matrix sigma;
    Matrix recon_err;  // x_hat - x
    AeLoss loss;
};

Forward forward(const AutoencoderModel& model, const Matrix& x, const Matrix& noise)
{
    tensor::require_shape(noise, kLatentDim, x.cols(), "ae_loss noise");
    Forward f;
    f.latent = encode_batch(model, x, &f.enc_cache);
    f.sigma = f.latent.log_sigma.array().exp();
    const Matrix z = f.latent.mu + f.sigma.cwiseProduct(noise);
    f.recon_err = nn::mlp_forward(model.store, model.decoder, z, &f.dec_cache) - x;
    const double batch = static_cast<double>(x.cols());
    f.loss.reconstruction = f.recon_err.squaredNorm() / batch;
    f.loss.regularizer = 0.5 * (f.latent.mu.squaredNorm() + f.latent.log_sigma.squaredNorm()) / batch;
    f.loss.total = f.loss.reconstruction + f.loss.regularizer;
    return f;
}

}  // namespace

AeLoss ae_loss(const AutoencoderModel& model, const Matrix& x, const Matrix& noise)
{
    return forward(model, x, noise).loss;
}

AeLoss ae_loss_and_grad(AutoencoderModel& model, const Matrix& x, const Matrix& noise)
{
    if (model.frozen()) throw UsageError("autoencoder is frozen");
    Forward f = forward(model, x, noise);
    const double batch = static_cast<double>(x.cols());
    const Matrix dz = nn::mlp_backward(model.store, model.decoder, f.dec_cache, (2.0 / batch) * f.recon_err);
    Matrix draw(2 * kLatentDim, x.cols());
    draw.topRows(kLatentDim) = dz + f.latent.mu / batch;
    draw.bottomRows(kLatentDim) =
        dz.cwiseProduct(noise).cwiseProduct(f.sigma) + f.latent.log_sigma / batch;
    nn::mlp_backward(model.store, model.encoder, f.enc_cache, draw);
    return f.loss;
}

Eigen::MatrixXf gather_observations(const std::vector<const rollout::RolloutDataset*>& datasets,
                                    std::size_t max_samples, std::uint64_t seed)
{
    std::vector<const float*> rows;
    for (const auto* ds : datasets) {
        for (const auto& ep : ds->episodes) {
            for (std::size_t t = 0; t < ep.length(); ++t) rows.push_back(ep.observation(t));
        }
    }
    if (max_samples > 0 && rows.size() > max_samples) {
        std::mt19937_64 rng(seed);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(max_samples);
    }
    Eigen::MatrixXf out(kObsDim, static_cast<tensor::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        out.col(static_cast<tensor::Index>(j)) = Eigen::Map<const Eigen::VectorXf>(rows[j], kObsDim);
    }
    return out;
}

AeTrainResult train_autoencoder(const Eigen::MatrixXf& observations, const AeTrainConfig& config,
                                const std::function<void(const AeEpochStats&)>& on_epoch)
{
    if (observations.cols() == 0) throw std::invalid_argument("train_autoencoder: no observations");
    if (observations.rows() != kObsDim) throw tensor::ShapeError("train_autoencoder: expected 180 rows");
    if (config.batch_size < 1 || config.epochs < 0) throw std::invalid_argument("train_autoencoder: bad config");

    AeTrainResult result{AutoencoderModel::create(config.seed), {}};
    AutoencoderModel& model = result.model;
    std::mt19937_64 rng(config.seed ^ 0x5851F42D4C957F2DULL);
    std::normal_distribution<double> normal;
    const optim::AdamConfig adam{.lr = config.lr};

    const auto n = static_cast<std::size_t>(observations.cols());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        double recon_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t b = std::min<std::size_t>(config.batch_size, n - start);
            Matrix x(kObsDim, static_cast<tensor::Index>(b));
            Matrix noise(kLatentDim, static_cast<tensor::Index>(b));
            for (std::size_t j = 0; j < b; ++j) {
                x.col(static_cast<tensor::Index>(j)) =
                    observations.col(static_cast<tensor::Index>(order[start + j])).cast<double>();
            }
            for (tensor::Index k = 0; k < noise.size(); ++k) noise.data()[k] = normal(rng);

            model.store.zero_grad();
            const AeLoss loss = ae_loss_and_grad(model, x, noise);
            if (!std::isfinite(loss.total)) {
                throw DivergenceError(epoch, "autoencoder loss became non-finite at epoch " + std::to_string(epoch));
            }
            if (config.clip_norm > 0.0) optim::clip_global_norm(model.store, config.clip_norm);
            if (optim::adam_update(model.store, adam) != optim::StepStatus::Ok) {
                throw DivergenceError(epoch, "autoencoder gradient became non-finite at epoch " +
                                                 std::to_string(epoch));
            }
            loss_sum += loss.total * static_cast<double>(b);
            recon_sum += loss.reconstruction * static_cast<double>(b);
        }
        AeEpochStats stats{epoch, loss_sum / static_cast<double>(n), recon_sum / static_cast<double>(n)};
        result.curve.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    model.freeze();
    return result;
}

}  // namespace fbwm::ae

#include "fbwm/worldmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "fbwm/eval/divergence.hpp"
#include "fbwm/optim.hpp"

namespace fbwm::wm {

namespace {

constexpr Index kMuRows = kComponents * kLatentDim;
constexpr Index kFlagRow = 2 * kMuRows;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kLogComponents = std::log(static_cast<double>(kComponents));

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s)
{
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw std::invalid_argument("bad number: " + s);
    return v;
}

}  // namespace

WorldModel::WorldModel(int hidden_size, double lambda_weight) : hidden(hidden_size), lambda(lambda_weight)
{
    if (hidden < 1) throw std::invalid_argument("world model hidden size must be >= 1");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    lstm = nn::Lstm::create(store, "lstm", kInputDim, hidden);
    head = nn::Linear::create(store, "head", hidden, kHeadDim);
    if (lambda > 0.0) probe = nn::Linear::create(store, "probe", hidden, kNumProbes);
}

WorldModel WorldModel::create(int hidden, double lambda, std::uint64_t seed)
{
    WorldModel m(hidden, lambda);
    std::mt19937_64 rng(seed);
    nn::init_uniform(m.store, m.lstm, rng);
    nn::init_uniform(m.store, m.head, rng);
    if (m.probe) nn::init_uniform(m.store, *m.probe, rng);
    return m;
}

checkpoint::Checkpoint WorldModel::to_checkpoint() const
{
    checkpoint::Checkpoint ck;
    ck.kind = "worldmodel";
    ck.attributes["hidden"] = std::to_string(hidden);
    ck.attributes["lambda"] = format_double(lambda);
    ck.attributes["probe"] = probe ? "1" : "0";
    ck.add_params(store);
    return ck;
}

WorldModel WorldModel::from_checkpoint(const checkpoint::Checkpoint& ck)
{
    if (ck.kind != "worldmodel") {
        throw checkpoint::CheckpointError(checkpoint::CheckpointErrorCode::Mismatch,
                                          "expected a worldmodel checkpoint, got " + ck.kind);
    }
    const int hidden = std::stoi(ck.attribute("hidden"));
    const double lambda = parse_double(ck.attribute("lambda"));
    WorldModel m(hidden, lambda);
    ck.restore_params(m.store);
    return m;
}

Vector step_input(const Vector& z, env::Action a)
{
    Vector x(kInputDim);
    x.head(kLatentDim) = z;
    x[kLatentDim] = a == env::Action::Flap ? 1.0 : 0.0;
    return x;
}

StepOutput wm_step(const WorldModel& model, const Vector& z, env::Action a, const nn::LstmState& state)
{
    if (z.size() != kLatentDim) throw tensor::ShapeError("wm_step: latent must have 8 entries");
    StepOutput out;
    out.hidden = nn::lstm_step(model.store, model.lstm, step_input(z, a), state);
    Vector y = model.store.value(model.head.bias).col(0);
    y.noalias() += model.store.value(model.head.weight) * out.hidden.h;
    out.mixture.mu = Eigen::Map<const Matrix>(y.data(), kLatentDim, kComponents);
    out.mixture.sigma = Eigen::Map<const Matrix>(y.data() + kMuRows, kLatentDim, kComponents).array().exp();
    out.end_flag = nn::sigmoid(y[kFlagRow]);
    return out;
}

double mdn_nll(const Eigen::Ref<const Matrix>& mu, const Eigen::Ref<const Matrix>& log_sigma,
               const Eigen::Ref<const Vector>& z, MdnGradient* grad)
{
    if (mu.rows() != kLatentDim || mu.cols() != kComponents || log_sigma.rows() != kLatentDim ||
        log_sigma.cols() != kComponents || z.size() != kLatentDim) {
        throw tensor::ShapeError("mdn_nll: expected 8x5 parameters and an 8-vector");
    }
    if (!mu.allFinite() || !log_sigma.allFinite() || !z.allFinite()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    Eigen::Matrix<double, kLatentDim, kComponents> u;
    Eigen::Matrix<double, kComponents, 1> log_p;
    for (int i = 0; i < kComponents; ++i) {
        u.col(i) = ((z - mu.col(i)).array() * (-log_sigma.col(i).array()).exp()).matrix();
        log_p[i] = -kLatentDim * kHalfLog2Pi - log_sigma.col(i).sum() - 0.5 * u.col(i).squaredNorm();
    }
    const double m = log_p.maxCoeff();
    const double lse = m + std::log((log_p.array() - m).exp().sum());
    const double nll = kLogComponents - lse;
    if (grad) {
        const Eigen::Matrix<double, kComponents, 1> resp = (log_p.array() - lse).exp();
        grad->d_mu.resize(kLatentDim, kComponents);
        grad->d_log_sigma.resize(kLatentDim, kComponents);
        grad->d_z = Vector::Zero(kLatentDim);
        for (int i = 0; i < kComponents; ++i) {
            const auto u_over_sigma = u.col(i).array() * (-log_sigma.col(i).array()).exp();
            grad->d_mu.col(i) = (-resp[i] * u_over_sigma).matrix();
            grad->d_log_sigma.col(i) = (resp[i] * (1.0 - u.col(i).array().square())).matrix();
            grad->d_z += (resp[i] * u_over_sigma).matrix();
        }
    }
    return nll;
}

double mdn_nll(const MixtureParams& mixture, const Vector& z)
{
    return mdn_nll(mixture.mu, mixture.sigma.array().log().matrix(), z);
}

Vector sample_next_latent(const MixtureParams& mixture, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> pick(0, kComponents - 1);
    std::normal_distribution<double> normal;
    const int i = pick(rng);
    Vector z(kLatentDim);
    for (int j = 0; j < kLatentDim; ++j) z[j] = mixture.mu(j, i) + mixture.sigma(j, i) * normal(rng);
    return z;
}

LatentEpisode encode_episode(const ae::AutoencoderModel& model, const rollout::Episode& episode)
{
    const auto n = static_cast<Index>(episode.length());
    const Matrix obs = Eigen::Map<const Eigen::MatrixXf>(episode.observations.data(), env::kLidarRays, n)
                           .cast<double>();
    const ae::EncodedBatch enc = ae::encode_batch(model, obs);
    LatentEpisode ep;
    ep.mu = enc.mu;
    ep.sigma = enc.log_sigma.array().exp();
    ep.actions.resize(n);
    ep.end_flags.resize(n);
    for (Index t = 0; t < n; ++t) {
        ep.actions[t] = episode.actions[static_cast<std::size_t>(t)] == env::Action::Flap ? 1.0 : 0.0;
        ep.end_flags[t] = episode.end_flags[static_cast<std::size_t>(t)];
    }
    ep.features = Eigen::Map<const Eigen::MatrixXf>(episode.features.data(), env::kNumFeatures, n).cast<double>();
    ep.policy = episode.policy;
    return ep;
}

std::vector<LatentEpisode> encode_dataset(const ae::AutoencoderModel& model, const rollout::RolloutDataset& dataset)
{
    if (!model.frozen()) throw UsageError("world-model latents require a frozen autoencoder");
    std::vector<LatentEpisode> out;
    out.reserve(dataset.episodes.size());
    for (const auto& ep : dataset.episodes) out.push_back(encode_episode(model, ep));
    return out;
}

namespace {

struct Pass {
    nn::LstmCache cache;
    Matrix h;       // H x T
    Matrix d_head;  // kHeadDim x T
    Matrix d_probe; // kNumProbes x T
    std::vector<double>* step_nll = nullptr;
    EpisodeLosses losses;
};

// Shared forward pass; fills the output-layer gradients when `want_grad`.
void forward(const WorldModel& model, const LatentEpisode& ep, const Matrix& z, bool want_grad, bool want_probe,
             Pass& pass)
{
    const Index n = ep.length();
    if (n < 2) throw std::invalid_argument("world-model losses need episodes of at least 2 steps");
    tensor::require_shape(z, kLatentDim, n, "episode latents");
    const Index T = n - 1;
    const double inv_t = 1.0 / static_cast<double>(T);

    Matrix x(kInputDim, T);
    x.topRows(kLatentDim) = z.leftCols(T);
    x.row(kLatentDim) = ep.actions.head(T).transpose();
    pass.h = nn::lstm_forward(model.store, model.lstm, x, nn::LstmState::zeros(model.hidden),
                              want_grad ? &pass.cache : nullptr);

    Matrix y = model.store.value(model.head.weight) * pass.h;
    y.colwise() += model.store.value(model.head.bias).col(0);

    if (want_grad) pass.d_head.resize(kHeadDim, T);
    double nll_sum = 0.0;
    double flag_sum = 0.0;
    MdnGradient g;
    for (Index t = 0; t < T; ++t) {
        const Eigen::Map<const Matrix> mu(y.col(t).data(), kLatentDim, kComponents);
        const Eigen::Map<const Matrix> log_sigma(y.col(t).data() + kMuRows, kLatentDim, kComponents);
        const double nll = mdn_nll(mu, log_sigma, z.col(t + 1), want_grad ? &g : nullptr);
        if (pass.step_nll) pass.step_nll->push_back(nll);
        nll_sum += nll;
        const double e_hat = nn::sigmoid(y(kFlagRow, t));
        const double err = ep.end_flags[t + 1] - e_hat;
        flag_sum += err * err;
        if (want_grad) {
            auto d = pass.d_head.col(t);
            d.head(kMuRows) = Eigen::Map<const Vector>(g.d_mu.data(), kMuRows) * inv_t;
            d.segment(kMuRows, kMuRows) = Eigen::Map<const Vector>(g.d_log_sigma.data(), kMuRows) * inv_t;
            d[kFlagRow] = kFlagWeight * inv_t * (-2.0 * err) * e_hat * (1.0 - e_hat);
        }
    }
    EpisodeLosses& L = pass.losses;
    L.nll = nll_sum * inv_t;
    L.flag = kFlagWeight * flag_sum * inv_t;
    L.predictive = L.nll + L.flag;
    L.total = L.predictive;

    if (want_probe && model.probe) {
        Matrix p = model.store.value(model.probe->weight) * pass.h;
        p.colwise() += model.store.value(model.probe->bias).col(0);
        Matrix resid(kNumProbes, T);
        for (int k = 0; k < kNumProbes; ++k) {
            resid.row(k) = p.row(k) - ep.features.row(kProbeFeatures[static_cast<std::size_t>(k)]).head(T);
        }
        L.probe = resid.squaredNorm() * inv_t;
        if (model.lambda > 0.0) {
            L.total = L.predictive + model.lambda * L.probe;
            if (want_grad) pass.d_probe = (2.0 * model.lambda * inv_t) * resid;
        }
    }
}

}  // namespace

EpisodeLosses episode_losses(const WorldModel& model, const LatentEpisode& ep, const Matrix* z)
{
    Pass pass;
    forward(model, ep, z ? *z : ep.mu, false, true, pass);
    return pass.losses;
}

EpisodeLosses episode_loss_and_grad(WorldModel& model, const LatentEpisode& ep, const Matrix* z)
{
    Pass pass;
    const Matrix& latents = z ? *z : ep.mu;
    forward(model, ep, latents, true, true, pass);

    auto& store = model.store;
    store.grad(model.head.weight).noalias() += pass.d_head * pass.h.transpose();
    store.grad(model.head.bias) += pass.d_head.rowwise().sum();
    Matrix dh = store.value(model.head.weight).transpose() * pass.d_head;
    if (pass.d_probe.size() > 0) {
        store.grad(model.probe->weight).noalias() += pass.d_probe * pass.h.transpose();
        store.grad(model.probe->bias) += pass.d_probe.rowwise().sum();
        dh.noalias() += store.value(model.probe->weight).transpose() * pass.d_probe;
    }
    nn::lstm_backward(store, model.lstm, pass.cache, dh);
    return pass.losses;
}

double predictive_loss(const WorldModel& model, const LatentEpisode& ep)
{
    Pass pass;
    forward(model, ep, ep.mu, false, false, pass);
    return pass.losses.predictive;
}

std::vector<double> teacher_forced_nll(const WorldModel& model, const LatentEpisode& ep)
{
    std::vector<double> out;
    Pass pass;
    pass.step_nll = &out;
    forward(model, ep, ep.mu, false, false, pass);
    return out;
}

double probe_loss(const WorldModel& model, const LatentEpisode& ep)
{
    if (!model.probe) throw UsageError("probe_loss: model has no probe weights");
    return episode_losses(model, ep).probe;
}

double total_loss(const WorldModel& model, const LatentEpisode& ep)
{
    return episode_losses(model, ep).total;
}

Matrix hidden_states(const WorldModel& model, const LatentEpisode& ep)
{
    const Index T = ep.length() - 1;
    if (T < 1) return Matrix(model.hidden, 0);
    Matrix x(kInputDim, T);
    x.topRows(kLatentDim) = ep.mu.leftCols(T);
    x.row(kLatentDim) = ep.actions.head(T).transpose();
    return nn::lstm_forward(model.store, model.lstm, x, nn::LstmState::zeros(model.hidden));
}

double mean_predictive_loss(const WorldModel& model, const std::vector<LatentEpisode>& episodes)
{
    if (episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (const auto& ep : episodes) sum += predictive_loss(model, ep);
    return sum / static_cast<double>(episodes.size());
}

WmTrainResult train_worldmodel(const std::vector<LatentEpisode>& train, const std::vector<LatentEpisode>& test_expert,
                               const std::vector<LatentEpisode>& test_random, const WmTrainConfig& config,
                               const std::function<void(const EpochMetrics&)>& on_epoch)
{
    if (train.empty()) throw std::invalid_argument("train_worldmodel: empty training set");
    WmTrainResult result{WorldModel::create(config.hidden, config.lambda, config.seed), {}, false, 0, {}};
    WorldModel& model = result.model;
    std::mt19937_64 rng(config.seed ^ 0xD1B54A32D192ED03ULL);
    std::normal_distribution<double> normal;
    const optim::AdamConfig adam{config.lr, config.beta1, config.beta2, config.eps};

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;

    auto mark_diverged = [&](int epoch, EpochMetrics& m, std::string reason) {
        m.diverged = true;
        result.diverged = true;
        result.divergence_epoch = epoch;
        result.divergence_reason = std::move(reason);
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochMetrics m;
        m.epoch = epoch;
        double pred_sum = 0.0;
        double probe_sum = 0.0;
        std::size_t seen = 0;
        Matrix sampled;
        for (std::size_t idx : order) {
            const LatentEpisode& ep = train[idx];
            if (ep.length() < 2) continue;
            const Matrix* z = nullptr;
            if (config.sample_latents) {
                sampled.resize(kLatentDim, ep.length());
                for (Index k = 0; k < sampled.size(); ++k) {
                    sampled.data()[k] = ep.mu.data()[k] + ep.sigma.data()[k] * normal(rng);
                }
                z = &sampled;
            }
            model.store.zero_grad();
            const EpisodeLosses L = episode_loss_and_grad(model, ep, z);
            pred_sum += L.predictive;
            probe_sum += L.probe;
            ++seen;
            if (!std::isfinite(L.total)) {
                mark_diverged(epoch, m, "non-finite training loss");
                break;
            }
            if (config.clip_norm > 0.0) optim::clip_global_norm(model.store, config.clip_norm);
            if (optim::adam_update(model.store, adam) != optim::StepStatus::Ok) {
                mark_diverged(epoch, m, "non-finite gradient");
                break;
            }
        }
        const double denom = static_cast<double>(std::max<std::size_t>(seen, 1));
        m.train_pred_loss = pred_sum / denom;
        m.train_probe_loss = probe_sum / denom;
        if (!m.diverged) {
            history.push_back(m.train_pred_loss);
            const eval::DivergenceVerdict v = eval::detect_divergence(history, model.store.values_finite());
            if (v.diverged) mark_diverged(epoch, m, v.reason);
        }
        if (!m.diverged) {
            m.test_pred_expert = mean_predictive_loss(model, test_expert);
            m.test_pred_random = mean_predictive_loss(model, test_random);
            const double ne = static_cast<double>(test_expert.size());
            const double nr = static_cast<double>(test_random.size());
            if (ne + nr > 0) {
                m.test_pred_loss = ((ne > 0 ? ne * m.test_pred_expert : 0.0) +
                                    (nr > 0 ? nr * m.test_pred_random : 0.0)) / (ne + nr);
            } else {
                m.test_pred_loss = std::numeric_limits<double>::quiet_NaN();
            }
        } else {
            m.test_pred_loss = m.test_pred_expert = m.test_pred_random = std::numeric_limits<double>::quiet_NaN();
        }
        result.metrics.push_back(m);
        if (on_epoch) on_epoch(m);
        if (m.diverged) break;
    }
    return result;
}

}  // namespace fbwm::wm

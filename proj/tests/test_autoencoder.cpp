#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fbwm/autoencoder.hpp"
#include "fbwm/gradcheck.hpp"

using namespace fbwm;
using namespace fbwm::ae;

namespace {

std::vector<double> random_obs(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(kObsDim);
    for (double& v : x) v = u(rng);
    return x;
}

Matrix random_batch(std::mt19937_64& rng, int rows, int cols, double scale = 1.0)
{
    std::normal_distribution<double> n;
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = scale * n(rng);
    return m;
}

double op_norm(const Matrix& m)
{
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

}  // namespace

TEST_CASE("zero model encodes to the standard normal")
{
    const AutoencoderModel m;
    std::mt19937_64 rng(1);
    const auto x = random_obs(rng);
    const LatentGaussian g = encode(m, x);
    CHECK(g.mu.isZero(0.0));
    CHECK((g.sigma.array() == 1.0).all());
}

TEST_CASE("encoding is deterministic")
{
    const AutoencoderModel m = AutoencoderModel::create(3);
    std::mt19937_64 rng(2);
    const auto x = random_obs(rng);
    const LatentGaussian a = encode(m, x);
    const LatentGaussian b = encode(m, x);
    CHECK(a.mu == b.mu);
    CHECK(a.sigma == b.sigma);
    CHECK((a.sigma.array() > 0.0).all());
    CHECK_THROWS_AS(encode(m, std::span<const double>(x.data(), 10)), tensor::ShapeError);
}

TEST_CASE("encoder mean is Lipschitz in each ray")
{
    const AutoencoderModel m = AutoencoderModel::create(5);
    const auto& layers = m.encoder.layers;
    const Matrix& w1 = m.store.value(layers[0].weight);
    const Matrix& w2 = m.store.value(layers[1].weight);
    const Matrix w3 = m.store.value(layers[2].weight).topRows(kLatentDim);

    std::mt19937_64 rng(6);
    const double delta = 0.05;
    for (int k : {0, 45, 90, 179}) {
        auto x = random_obs(rng);
        const Vector mu0 = encode(m, x).mu;
        x[static_cast<std::size_t>(k)] += delta;
        const Vector mu1 = encode(m, x).mu;
        const double bound = op_norm(w3) * op_norm(w2) * w1.col(k).norm() * delta;
        CHECK((mu1 - mu0).norm() <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("latent sampling")
{
    std::mt19937_64 rng(11);
    const LatentGaussian tight{Vector::LinSpaced(kLatentDim, -1.0, 1.0), Vector::Constant(kLatentDim, std::exp(-50.0))};
    CHECK((sample_latent(tight, rng) - tight.mu).cwiseAbs().maxCoeff() <= 1e-15);

    const LatentGaussian g{Vector::LinSpaced(kLatentDim, -2.0, 3.0), Vector::LinSpaced(kLatentDim, 0.5, 2.0)};
    const int n = 100'000;
    Vector sum = Vector::Zero(kLatentDim);
    for (int i = 0; i < n; ++i) sum += sample_latent(g, rng);
    const Vector mean = sum / n;
    for (int j = 0; j < kLatentDim; ++j) CHECK(std::abs(mean[j] - g.mu[j]) <= 4.0 * g.sigma[j] / std::sqrt(n));

    std::mt19937_64 r1(5);
    std::mt19937_64 r2(5);
    CHECK(sample_latent(g, r1) == sample_latent(g, r2));
}

TEST_CASE("decoder with zero weights returns its bias")
{
    AutoencoderModel m;
    const auto& last = m.decoder.layers.back();
    std::mt19937_64 rng(1);
    m.store.value(last.bias) = random_batch(rng, kObsDim, 1);
    const Vector z = Vector::LinSpaced(kLatentDim, -3.0, 3.0);
    CHECK(decode(m, z) == m.store.value(last.bias).col(0));

    const AutoencoderModel r = AutoencoderModel::create(2);
    CHECK(decode(r, z) == decode(r, z));
}

TEST_CASE("loss closed forms")
{
    AutoencoderModel m;
    std::mt19937_64 rng(4);
    const Matrix x = random_batch(rng, kObsDim, 1, 0.3);
    const Matrix noise = random_batch(rng, kLatentDim, 1);
    m.store.value(m.decoder.layers.back().bias) = x;
    CHECK(ae_loss(m, x, noise).total == 0.0);

    m.store.value(m.decoder.layers.back().bias) = x.array() + 1.0;
    const AeLoss l = ae_loss(m, x, noise);
    CHECK(l.reconstruction == doctest::Approx(180.0).epsilon(1e-12));
    CHECK(l.regularizer == 0.0);

    Matrix batch(kObsDim, 3);
    batch << x, x, x;
    CHECK(ae_loss(m, batch, random_batch(rng, kLatentDim, 3)).reconstruction ==
          doctest::Approx(180.0).epsilon(1e-12));
    CHECK_THROWS_AS(ae_loss(m, batch, noise), tensor::ShapeError);
}

TEST_CASE("loss gradient matches finite differences with frozen noise")
{
    AutoencoderModel m = AutoencoderModel::create(9);
    std::mt19937_64 rng(10);
    Matrix x(kObsDim, 3);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = std::uniform_real_distribution<double>(0, 1)(rng);
    const Matrix noise = random_batch(rng, kLatentDim, 3);
    m.store.zero_grad();
    ae_loss_and_grad(m, x, noise);
    const auto report = gradcheck::finite_difference_check(
        m.store, [&] { return ae_loss(m, x, noise).total; }, {.h = 1e-5, .min_coords = 400, .seed = 2});
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("training memorizes a single observation")
{
    std::mt19937_64 rng(12);
    Eigen::MatrixXf obs(kObsDim, 1);
    for (int k = 0; k < kObsDim; ++k) obs(k, 0) = static_cast<float>(std::uniform_real_distribution<double>(0, 1)(rng));
    const AeTrainResult r = train_autoencoder(obs, {.epochs = 8000, .batch_size = 1, .lr = 3e-3, .seed = 1});
    CHECK(r.curve.back().reconstruction < 1e-3);
    CHECK(r.model.frozen());
}

TEST_CASE("training is deterministic and freezes the model")
{
    std::mt19937_64 rng(13);
    Eigen::MatrixXf obs(kObsDim, 40);
    for (Eigen::Index k = 0; k < obs.size(); ++k) {
        obs.data()[k] = static_cast<float>(std::uniform_real_distribution<double>(0, 1)(rng));
    }
    const AeTrainConfig cfg{.epochs = 3, .batch_size = 16, .seed = 4};
    AeTrainResult a = train_autoencoder(obs, cfg);
    const AeTrainResult b = train_autoencoder(obs, cfg);
    CHECK(a.model.store.digest() == b.model.store.digest());
    CHECK(a.model.to_checkpoint(1) == b.model.to_checkpoint(1));
    REQUIRE(a.curve.size() == 3);

    CHECK_THROWS_AS(ae_loss_and_grad(a.model, obs.cast<double>(), Matrix::Zero(kLatentDim, 40)), UsageError);

    const AutoencoderModel back = AutoencoderModel::from_checkpoint(a.model.to_checkpoint(7));
    CHECK(back.frozen());
    CHECK(back.store.digest() == a.model.store.digest());
    CHECK(back.to_checkpoint(7).attribute("env_digest") == "7");
}

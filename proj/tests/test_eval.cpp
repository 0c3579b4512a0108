#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fbwm/eval/decodability.hpp"
#include "fbwm/eval/divergence.hpp"
#include "fbwm/eval/drift.hpp"
#include "fbwm/eval/probe.hpp"
#include "fbwm/eval/sweep.hpp"

using namespace fbwm;
using namespace fbwm::eval;

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> n;
    Matrix m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
    return m;
}

wm::LatentEpisode toy_episode(std::mt19937_64& rng, Eigen::Index n)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    wm::LatentEpisode ep;
    ep.mu = gaussian(rng, wm::kLatentDim, n);
    ep.sigma = Matrix::Constant(wm::kLatentDim, n, 0.1);
    ep.actions = Vector(n);
    for (Eigen::Index t = 0; t < n; ++t) ep.actions[t] = u(rng) < 0.2 ? 1.0 : 0.0;
    ep.features = Matrix(env::kNumFeatures, n);
    for (Eigen::Index k = 0; k < ep.features.size(); ++k) ep.features.data()[k] = u(rng);
    ep.end_flags = Vector::Zero(n);
    ep.end_flags[n - 1] = 1.0;
    return ep;
}

RunRecord fake_run(double lambda, std::uint64_t seed, std::vector<double> test_losses, bool diverged = false)
{
    wm::WmTrainResult r{wm::WorldModel(4, lambda), {}, diverged, 0, {}};
    for (std::size_t i = 0; i < test_losses.size(); ++i) {
        wm::EpochMetrics m;
        m.epoch = static_cast<int>(i) + 1;
        m.test_pred_loss = test_losses[i];
        m.train_pred_loss = test_losses[i] + 1.0;
        r.metrics.push_back(m);
    }
    if (diverged) r.divergence_epoch = static_cast<int>(test_losses.size());
    return {{lambda, 4, seed}, std::move(r)};
}

}  // namespace

TEST_CASE("ridge recovers an exact linear map")
{
    std::mt19937_64 rng(1);
    const Matrix x = gaussian(rng, 60, 4);
    const Vector w = (Vector(4) << 0.5, -1.0, 2.0, 0.25).finished();
    const Vector y = (x * w).array() + 3.0;
    const Vector fit = fit_ridge(x, y, 1e-12);
    CHECK((fit.head(4) - w).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(fit[4] - 3.0) < 1e-9);
    CHECK(evaluate_probe(fit, x, y).r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ridge solution matches a gradient-descent oracle")
{
    std::mt19937_64 rng(2);
    const Matrix x = gaussian(rng, 10, 3);
    const Vector y = gaussian(rng, 10, 1).col(0);
    const double reg = 0.7;

    Matrix a(10, 4);
    a << x, Vector::Ones(10);
    Vector d = Vector::Ones(4);
    d[3] = 0.0;
    const double step = 0.5 / (Eigen::JacobiSVD<Matrix>(a).singularValues()(0) * Eigen::JacobiSVD<Matrix>(a).singularValues()(0) + reg);
    Vector w = Vector::Zero(4);
    for (int it = 0; it < 200'000; ++it) {
        const Vector g = a.transpose() * (a * w - y) + reg * d.cwiseProduct(w);
        w -= step * g;
    }
    CHECK((fit_ridge(x, y, reg) - w).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ridge edge cases")
{
    std::mt19937_64 rng(3);
    Matrix x = gaussian(rng, 20, 3);
    x.col(2) = x.col(1);
    const Vector y = gaussian(rng, 20, 1).col(0);
    CHECK_THROWS_AS(fit_ridge(x, y, 0.0), NumericalError);
    CHECK_NOTHROW(fit_ridge(x, y, 1e-3));

    const Matrix z = gaussian(rng, 30, 2);
    CHECK(default_ridge(z) == doctest::Approx(1e-3 * (z.transpose() * z).trace() / 2.0));

    const ProbeFit constant = fit_posthoc_probe(z, Vector::Constant(30, 0.4), z, Vector::Constant(30, 0.4));
    CHECK(constant.degenerate);
    CHECK(std::isnan(constant.r2));
}

TEST_CASE("noise is not decodable")
{
    std::mt19937_64 rng(4);
    const int h = 6;
    const int n = 50 * h;
    const ProbeFit fit = fit_posthoc_probe(gaussian(rng, n, h), gaussian(rng, n, 1).col(0), gaussian(rng, n, h),
                                           gaussian(rng, n, 1).col(0));
    CHECK(fit.r2 <= 0.05);
    CHECK(!fit.degenerate);
}

TEST_CASE("divergence detector")
{
    std::vector<double> losses(10, 1.0);
    CHECK(!detect_divergence(losses).diverged);
    CHECK(detect_divergence(losses, false).diverged);

    losses[3] = std::numeric_limits<double>::quiet_NaN();
    const DivergenceVerdict nan = detect_divergence(losses);
    CHECK(nan.diverged);
    CHECK(nan.epoch == 4);

    std::vector<double> spike(40, 2.0);
    spike[29] = 25.0;
    const DivergenceVerdict s = detect_divergence(spike);
    CHECK(s.diverged);
    CHECK(s.epoch == 30);

    // Early spikes fall inside the warm-up window.
    std::vector<double> early(40, 2.0);
    early[5] = 1000.0;
    CHECK(!detect_divergence(early).diverged);

    // Negative losses: the margin scales with the median's magnitude.
    std::vector<double> neg(30, -10.0);
    neg[25] = 70.0;
    CHECK(!detect_divergence(neg).diverged);
    neg[25] = 85.0;
    CHECK(detect_divergence(neg).epoch == 26);
}

TEST_CASE("summary statistics")
{
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(sample_sd({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(std::isnan(sample_sd({1.0})));
    CHECK(run_tag({64.0, 128, 3}) == "l64_h128_s3");
    CHECK(run_tag({0.5, 64, 1}) == "l0.5_h64_s1");
}

TEST_CASE("lambda summary excludes diverged runs")
{
    const std::vector<RunRecord> records = {fake_run(0, 1, {3, 2}), fake_run(0, 2, {3, 4}),
                                            fake_run(0, 3, {5}, true), fake_run(64, 1, {1, 1})};
    const auto rows = summarize_lambda(records);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].lambda == 0.0);
    CHECK(rows[0].runs == 3);
    CHECK(rows[0].diverged == 1);
    CHECK(rows[0].mean_test == 3.0);
    CHECK(rows[0].sd_test == doctest::Approx(std::sqrt(2.0)));
    CHECK(rows[0].median_test == 3.0);
    CHECK(rows[1].runs == 1);
    CHECK(std::isnan(rows[1].sd_test));
}

TEST_CASE("stability and scaling tables")
{
    const std::vector<RunRecord> all_ok = {fake_run(0, 1, {1, 1, 1, 1}), fake_run(0, 2, {1, 1, 1, 1})};
    const auto groups = stability_report(all_ok, 4);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].survival_fraction() == 1.0);
    CHECK(groups[0].divergence_epochs.empty());

    const std::vector<RunRecord> mixed = {fake_run(64, 1, {1, 1, 1, 1}), fake_run(64, 2, {1, 1}, true),
                                          fake_run(64, 3, {1}, true)};
    const auto g = stability_report(mixed, 4);
    REQUIRE(g.size() == 1);
    CHECK(g[0].seeds == 3);
    CHECK(g[0].survived == 1);
    CHECK(g[0].divergence_epochs == std::vector<int>{1, 2});

    const auto table = scaling_table({fake_run(0, 1, {4, 3, 2, 1})}, 4);
    REQUIRE(table.size() == 1);
    CHECK(table[0].mid_epoch == 2);
    CHECK(table[0].mid_test_loss == 3.0);
    CHECK(table[0].final_test_loss == 1.0);
}

TEST_CASE("sweep over two seeds")
{
    std::mt19937_64 rng(5);
    const std::vector<wm::LatentEpisode> train = {toy_episode(rng, 12), toy_episode(rng, 9)};
    const std::vector<wm::LatentEpisode> te = {toy_episode(rng, 8)};
    const std::vector<wm::LatentEpisode> tr = {toy_episode(rng, 5)};
    const SweepData data{&train, &te, &tr};
    const SweepGrid grid{{0.0}, {6}, {1, 2}};
    const wm::WmTrainConfig base{.epochs = 3};

    const auto a = run_sweep(data, grid, base, 1);
    const auto b = run_sweep(data, grid, base, 2);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a[i].key == b[i].key);
        CHECK(a[i].final_test_loss() == b[i].final_test_loss());
    }
    const auto rows = summarize_lambda(a);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].runs == 2);
    CHECK(rows[0].sd_test == doctest::Approx(sample_sd({a[0].final_test_loss(), a[1].final_test_loss()})));
}

TEST_CASE("closed loop drift")
{
    std::mt19937_64 rng(6);
    const wm::WorldModel m = wm::WorldModel::create(10, 0.0, 3);
    const wm::LatentEpisode ep = toy_episode(rng, 15);
    const auto open = wm::teacher_forced_nll(m, ep);

    std::mt19937_64 s(1);
    CHECK(closed_loop_nll(m, ep, kNoCutoff, s) == open);
    CHECK(closed_loop_nll(m, ep, 14, s) == open);
    CHECK_THROWS(closed_loop_nll(m, ep, 0, s));

    std::mt19937_64 s1(9);
    std::mt19937_64 s2(9);
    const auto c1 = closed_loop_nll(m, ep, 5, s1);
    const auto c2 = closed_loop_nll(m, ep, 5, s2);
    CHECK(c1 == c2);
    for (int t = 0; t < 5; ++t) CHECK(std::abs(c1[t] - open[t]) < 1e-12);
    bool differs = false;
    for (std::size_t t = 5; t < c1.size(); ++t) differs |= c1[t] != open[t];
    CHECK(differs);

    const std::vector<const wm::LatentEpisode*> eps = {&ep};
    const DriftCurve curve = drift_experiment(m, eps, 5, 9);
    CHECK(curve.cutoff == 5);
    REQUIRE(!curve.points.empty());
    CHECK(curve.points.front().t == 5);
    CHECK(drift_growth(curve, 3) == drift_growth(drift_experiment(m, eps, 5, 9), 3));
}

TEST_CASE("decodability leaves models untouched")
{
    std::mt19937_64 rng(7);
    std::vector<wm::LatentEpisode> eps;
    for (int i = 0; i < 6; ++i) eps.push_back(toy_episode(rng, 20));
    std::vector<const wm::LatentEpisode*> ptrs;
    for (const auto& e : eps) ptrs.push_back(&e);

    const wm::WorldModel m = wm::WorldModel::create(5, 64.0, 1);
    const wm::WorldModel twin = wm::WorldModel::create(5, 64.0, 2);
    const auto before = m.store.digest();
    const DecodabilityReport r = decodability_report(m, twin, ptrs);
    CHECK(m.store.digest() == before);
    CHECK(r.features.size() == env::kNumFeatures);
    CHECK(r.fit_rows == 3 * 19);
    CHECK(r.eval_rows == 3 * 19);
    CHECK(r.features[0].trained_feature);
    CHECK(!r.features[3].trained_feature);

    CHECK_THROWS(decodability_report(m, wm::WorldModel::create(6, 0.0, 2), ptrs));
}

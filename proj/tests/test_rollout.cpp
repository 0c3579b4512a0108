#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>

#include "fbwm/rollout.hpp"

using namespace fbwm;
using namespace fbwm::rollout;

namespace {

std::filesystem::path temp_file(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "fbwm_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::vector<char> slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

double flap_fraction(int n, const std::function<Action()>& draw)
{
    int flaps = 0;
    for (int i = 0; i < n; ++i) flaps += draw() == Action::Flap;
    return static_cast<double>(flaps) / n;
}

env::WorldFeatures features_for(const env::EnvConfig& c, double y, double vy, double gap_y)
{
    env::EnvState s = env::reset(c, 0);
    s.player_y = y;
    s.player_vy = vy;
    s.pipes = {{200.0, gap_y}};
    return env::world_features(s, c);
}

}  // namespace

TEST_CASE("random policy flap rate")
{
    std::mt19937_64 rng(42);
    CHECK(flap_fraction(1000, [&] { return random_policy(rng, 0.0); }) == 0.0);
    CHECK(flap_fraction(1000, [&] { return random_policy(rng, 1.0); }) == 1.0);
    const double f = flap_fraction(100'000, [&] { return random_policy(rng, 0.075); });
    CHECK(std::abs(f - 0.075) <= 0.003);
}

TEST_CASE("expert controller rule")
{
    const env::EnvConfig c;
    const HeuristicExpert expert(c, 15.0);
    std::mt19937_64 rng(1);
    CHECK(expert(features_for(c, 100.0, 0.0, 250.0), rng, 0.0) == Action::Noop);
    CHECK(expert(features_for(c, 300.0, 0.0, 250.0), rng, 0.0) == Action::Flap);
}

TEST_CASE("expert with epsilon 1 behaves like the random policy")
{
    const env::EnvConfig c;
    const HeuristicExpert expert(c, 15.0, 0.075);
    std::mt19937_64 rng(9);
    const env::WorldFeatures above = features_for(c, 100.0, 0.0, 250.0);
    const int n = 10'000;
    const double f = flap_fraction(n, [&] { return expert(above, rng, 1.0); });
    const double sigma = std::sqrt(0.075 * 0.925 / n);
    CHECK(std::abs(f - 0.075) <= 3.0 * sigma);
}

TEST_CASE("collection is deterministic and well formed")
{
    const env::EnvConfig c;
    const PolicySpec expert{};
    const CollectOptions one{.n_episodes = 1, .base_seed = 5, .max_length = 300};
    const RolloutDataset a = collect(c, expert, Split::Train, one);
    const RolloutDataset b = collect(c, expert, Split::Train, one);
    CHECK(a == b);

    const RolloutDataset ten = collect(c, expert, Split::Train, {.n_episodes = 10, .base_seed = 20, .max_length = 300});
    REQUIRE(ten.episodes.size() == 10);
    for (const Episode& ep : ten.episodes) {
        CHECK_NOTHROW(ep.check());
        CHECK(std::accumulate(ep.end_flags.begin(), ep.end_flags.end(), 0) == 1);
        CHECK(ep.end_flags.back() == 1);
        CHECK(replays(ep, c, 300));
    }
}

TEST_CASE("parallel collection matches serial collection")
{
    const env::EnvConfig c;
    const PolicySpec random{.tag = PolicyTag::Random};
    const RolloutDataset a = collect(c, random, Split::TestRandom, {.n_episodes = 12, .base_seed = 3, .jobs = 1});
    const RolloutDataset b = collect(c, random, Split::TestRandom, {.n_episodes = 12, .base_seed = 3, .jobs = 4});
    CHECK(a == b);
}

TEST_CASE("expert episodes outlast random episodes")
{
    const env::EnvConfig c;
    const CollectOptions opts{.n_episodes = 100, .base_seed = 100, .max_length = 1000, .jobs = 0};
    const RolloutDataset e = collect(c, {.tag = PolicyTag::Expert}, Split::Train, opts);
    const RolloutDataset r = collect(c, {.tag = PolicyTag::Random}, Split::TestRandom, opts);
    CHECK(e.total_steps() > r.total_steps());
}

TEST_CASE("dataset persistence")
{
    const env::EnvConfig c;
    RolloutDataset ds = collect(c, {}, Split::TestExpert, {.n_episodes = 3, .base_seed = 77, .max_length = 120});
    ds.env_config_digest = c.digest();
    const auto path = temp_file("ds.fbwm");
    save_dataset(ds, path);

    SUBCASE("round trip")
    {
        const LoadResult r = load_dataset(path, c.digest());
        CHECK(r.dataset == ds);
        CHECK(!r.digest_mismatch);
    }
    SUBCASE("config digest mismatch is reported")
    {
        const LoadResult r = load_dataset(path, c.digest() + 1);
        CHECK(r.digest_mismatch);
    }
    SUBCASE("bad magic")
    {
        auto bytes = slurp(path);
        bytes[0] = 'X';
        spit(path, bytes);
        try {
            load_dataset(path);
            FAIL("expected an error");
        } catch (const DatasetError& e) {
            CHECK(e.code == DatasetErrorCode::BadMagic);
        }
    }
    SUBCASE("version mismatch")
    {
        auto bytes = slurp(path);
        bytes[4] = static_cast<char>(kDatasetVersion + 1);
        spit(path, bytes);
        try {
            load_dataset(path);
            FAIL("expected an error");
        } catch (const DatasetError& e) {
            CHECK(e.code == DatasetErrorCode::VersionMismatch);
        }
    }
    SUBCASE("truncated")
    {
        auto bytes = slurp(path);
        bytes.resize(bytes.size() / 2);
        spit(path, bytes);
        try {
            load_dataset(path);
            FAIL("expected an error");
        } catch (const DatasetError& e) {
            CHECK(e.code == DatasetErrorCode::Truncated);
        }
    }
    SUBCASE("missing file")
    {
        try {
            load_dataset(temp_file("nope.fbwm"));
            FAIL("expected an error");
        } catch (const DatasetError& e) {
            CHECK(e.code == DatasetErrorCode::Io);
        }
    }
}

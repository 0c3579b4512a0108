#include "fbwm/rollout.hpp"

#include <algorithm>
#include <fstream>

#include "fbwm/binary_io.hpp"
#include "fbwm/parallel.hpp"

namespace fbwm::rollout {

namespace {

constexpr char kMagic[4] = {'F', 'B', 'W', 'M'};
constexpr std::uint32_t kMaxEpisodeLength = 1u << 24;
constexpr std::uint64_t kPolicyStreamSalt = 0x9E3779B97F4A7C15ULL;

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void append_row(Episode& ep, const env::EnvState& s, const env::EnvConfig& c)
{
    const env::Observation obs = env::lidar_scan(s, c);
    for (double v : obs) ep.observations.push_back(static_cast<float>(v));
    const env::WorldFeatures f = env::world_features(s, c);
    for (double v : f) ep.features.push_back(static_cast<float>(v));
}

}  // namespace

const char* to_string(PolicyTag p)
{
    return p == PolicyTag::Expert ? "expert" : "random";
}

const char* to_string(Split s)
{
    switch (s) {
    case Split::Train: return "train";
    case Split::TestExpert: return "test_expert";
    case Split::TestRandom: return "test_random";
    }
    return "?";
}

void Episode::check() const
{
    const std::size_t n = actions.size();
    if (n == 0) throw std::logic_error("episode is empty");
    if (observations.size() != n * env::kLidarRays) throw std::logic_error("observation count mismatch");
    if (features.size() != n * env::kNumFeatures) throw std::logic_error("feature count mismatch");
    if (end_flags.size() != n) throw std::logic_error("end flag count mismatch");
    for (std::size_t t = 0; t + 1 < n; ++t) {
        if (end_flags[t] != 0) throw std::logic_error("end flag set before the final step");
    }
    if (end_flags.back() != 1) throw std::logic_error("final end flag not set");
}

std::size_t RolloutDataset::total_steps() const
{
    std::size_t n = 0;
    for (const auto& ep : episodes) n += ep.length();
    return n;
}

Action random_policy(std::mt19937_64& rng, double p_flap)
{
    return uniform01(rng) < p_flap ? Action::Flap : Action::Noop;
}

HeuristicExpert::HeuristicExpert(const env::EnvConfig& config, double margin, double p_flap)
    : config_(config), scale_(env::FeatureScale::from(config)), margin_(margin), p_flap_(p_flap)
{
}

Action HeuristicExpert::operator()(const env::WorldFeatures& f, std::mt19937_64& rng, double epsilon) const
{
    if (uniform01(rng) < epsilon) {
        return random_policy(rng, p_flap_);
    }
    const double y = scale_.denormalize(0, f[0]);
    const double vy = scale_.denormalize(1, f[1]);
    const double gap_y = scale_.denormalize(4, f[4]);
    const double projected = y + std::min(vy + config_.gravity, config_.max_fall_speed);
    return projected > gap_y + margin_ ? Action::Flap : Action::Noop;
}

Episode run_episode(const env::EnvConfig& config, const PolicySpec& policy, std::uint64_t seed, int max_length)
{
    Episode ep;
    ep.policy = policy.tag;
    ep.seed = seed;
    std::mt19937_64 policy_rng(seed ^ kPolicyStreamSalt);
    const HeuristicExpert expert(config, policy.margin, policy.p_flap);

    env::EnvState s = env::reset(config, seed);
    for (int t = 0;; ++t) {
        append_row(ep, s, config);
        const bool last = s.terminated || t + 1 >= max_length;
        if (last) {
            ep.actions.push_back(Action::Noop);
            ep.end_flags.push_back(1);
            break;
        }
        Action a = policy.tag == PolicyTag::Expert
                       ? expert(env::world_features(s, config), policy_rng, policy.epsilon)
                       : random_policy(policy_rng, policy.p_flap);
        ep.actions.push_back(a);
        ep.end_flags.push_back(0);
        s = env::step(s, a, config);
    }
    return ep;
}

RolloutDataset collect(const env::EnvConfig& config, const PolicySpec& policy, Split split,
                       const CollectOptions& options)
{
    if (options.n_episodes < 1) throw std::invalid_argument("collect: n_episodes must be >= 1");
    if (options.max_length < 1) throw std::invalid_argument("collect: max_length must be >= 1");
    config.validate();
    RolloutDataset ds;
    ds.split = split;
    ds.env_config_digest = config.digest();
    ds.episodes.resize(static_cast<std::size_t>(options.n_episodes));
    parallel_for(ds.episodes.size(), options.jobs, [&](std::size_t i) {
        ds.episodes[i] = run_episode(config, policy, options.base_seed + i, options.max_length);
    });
    return ds;
}

bool replays(const Episode& ep, const env::EnvConfig& config, int max_length)
{
    Episode fresh;
    env::EnvState s = env::reset(config, ep.seed);
    const std::size_t n = ep.length();
    for (std::size_t t = 0; t < n; ++t) {
        append_row(fresh, s, config);
        const bool last = s.terminated || static_cast<int>(t) + 1 >= max_length;
        if (last != (t + 1 == n)) return false;
        if (!last) s = env::step(s, ep.actions[t], config);
    }
    return fresh.observations == ep.observations && fresh.features == ep.features;
}

void save_dataset(const RolloutDataset& ds, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError(DatasetErrorCode::Io, "cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    io::put<std::uint16_t>(out, kDatasetVersion);
    io::put<std::uint64_t>(out, ds.env_config_digest);
    io::put<std::uint8_t>(out, static_cast<std::uint8_t>(ds.split));
    io::put<std::uint64_t>(out, ds.episodes.size());
    for (const Episode& ep : ds.episodes) {
        ep.check();
        const std::size_t n = ep.length();
        io::put<std::uint8_t>(out, static_cast<std::uint8_t>(ep.policy));
        io::put<std::uint64_t>(out, ep.seed);
        io::put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
        io::put_array(out, ep.observations.data(), ep.observations.size());
        std::vector<std::uint8_t> actions(n);
        std::transform(ep.actions.begin(), ep.actions.end(), actions.begin(),
                       [](Action a) { return static_cast<std::uint8_t>(a); });
        io::put_array(out, actions.data(), n);
        io::put_array(out, ep.features.data(), ep.features.size());
        io::put_array(out, ep.end_flags.data(), n);
    }
    if (!out.flush()) throw DatasetError(DatasetErrorCode::Io, "write failed: " + path.string());
}

LoadResult load_dataset(const std::filesystem::path& path, std::uint64_t expected_digest)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError(DatasetErrorCode::Io, "cannot open: " + path.string());
    LoadResult result;
    RolloutDataset& ds = result.dataset;
    try {
        char magic[4];
        if (!in.read(magic, 4)) throw io::TruncatedInput();
        if (!std::equal(magic, magic + 4, kMagic)) {
            throw DatasetError(DatasetErrorCode::BadMagic, "not a dataset file: " + path.string());
        }
        const auto version = io::get<std::uint16_t>(in);
        if (version != kDatasetVersion) {
            throw DatasetError(DatasetErrorCode::VersionMismatch,
                               "dataset version " + std::to_string(version) + ", expected " +
                                   std::to_string(kDatasetVersion));
        }
        ds.env_config_digest = io::get<std::uint64_t>(in);
        const auto split = io::get<std::uint8_t>(in);
        if (split > 2) throw DatasetError(DatasetErrorCode::Corrupt, "bad split tag");
        ds.split = static_cast<Split>(split);
        const auto count = io::get<std::uint64_t>(in);
        for (std::uint64_t i = 0; i < count; ++i) {
            Episode ep;
            const auto tag = io::get<std::uint8_t>(in);
            if (tag > 1) throw DatasetError(DatasetErrorCode::Corrupt, "bad policy tag");
            ep.policy = static_cast<PolicyTag>(tag);
            ep.seed = io::get<std::uint64_t>(in);
            const auto n = io::get<std::uint32_t>(in);
            if (n == 0 || n > kMaxEpisodeLength) {
                throw DatasetError(DatasetErrorCode::Corrupt, "bad episode length");
            }
            ep.observations.resize(std::size_t{n} * env::kLidarRays);
            io::get_array(in, ep.observations.data(), ep.observations.size());
            std::vector<std::uint8_t> actions(n);
            io::get_array(in, actions.data(), n);
            ep.actions.resize(n);
            for (std::uint32_t t = 0; t < n; ++t) {
                if (actions[t] > 1) throw DatasetError(DatasetErrorCode::Corrupt, "bad action byte");
                ep.actions[t] = static_cast<Action>(actions[t]);
            }
            ep.features.resize(std::size_t{n} * env::kNumFeatures);
            io::get_array(in, ep.features.data(), ep.features.size());
            ep.end_flags.resize(n);
            io::get_array(in, ep.end_flags.data(), n);
            try {
                ep.check();
            } catch (const std::logic_error& e) {
                throw DatasetError(DatasetErrorCode::Corrupt, e.what());
            }
            ds.episodes.push_back(std::move(ep));
        }
    } catch (const io::TruncatedInput&) {
        throw DatasetError(DatasetErrorCode::Truncated, "truncated dataset file: " + path.string());
    }
    result.digest_mismatch = expected_digest != 0 && expected_digest != ds.env_config_digest;
    return result;
}

}  // namespace fbwm::rollout

#include "fbwm/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fbwm/cli/csv.hpp"
#include "fbwm/digest.hpp"

namespace fbwm::cli {

namespace {

template <typename T>
T parse_scalar(const std::string& key, const std::string& text)
{
    T v{};
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("bad value for " + key + ": '" + text + "' (expected true or false)");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a == std::string::npos) throw ConfigError("empty entry in list " + key);
        out.push_back(parse_scalar<T>(key, item.substr(a, b - a + 1)));
    }
    if (out.empty()) throw ConfigError(key + " must list at least one value");
    return out;
}

std::string show(double v) { return format_number(v); }
std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }

template <typename T>
std::string show_list(const std::vector<T>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + show(v[i]);
    return s;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

template <typename T>
Field scalar(const char* section, const char* key, T& ref)
{
    const std::string name = std::string(section) + "." + key;
    return {section, key, [&ref, name](const std::string& s) { ref = parse_scalar<T>(name, s); },
            [&ref] { return show(ref); }};
}

Field boolean(const char* section, const char* key, bool& ref)
{
    const std::string name = std::string(section) + "." + key;
    return {section, key, [&ref, name](const std::string& s) { ref = parse_bool(name, s); },
            [&ref] { return std::string(ref ? "true" : "false"); }};
}

template <typename T>
Field list(const char* section, const char* key, std::vector<T>& ref)
{
    const std::string name = std::string(section) + "." + key;
    return {section, key, [&ref, name](const std::string& s) { ref = parse_list<T>(name, s); },
            [&ref] { return show_list(ref); }};
}

// Key order here is the canonical order of the INI form.
std::vector<Field> fields(RunConfig& c)
{
    auto& e = c.env;
    auto& r = c.rollout;
    auto& a = c.autoencoder;
    auto& w = c.worldmodel;
    auto& v = c.eval;
    return {
        scalar("env", "screen_width", e.screen_width),
        scalar("env", "screen_height", e.screen_height),
        scalar("env", "ground_y", e.ground_y),
        scalar("env", "gravity", e.gravity),
        scalar("env", "flap_impulse", e.flap_impulse),
        scalar("env", "max_fall_speed", e.max_fall_speed),
        scalar("env", "pipe_speed", e.pipe_speed),
        scalar("env", "pipe_gap", e.pipe_gap),
        scalar("env", "pipe_width", e.pipe_width),
        scalar("env", "pipe_spacing", e.pipe_spacing),
        scalar("env", "rotation_rate", e.rotation_rate),
        scalar("env", "max_rotation_up", e.max_rotation_up),
        scalar("env", "max_rotation_down", e.max_rotation_down),
        scalar("env", "lidar_max_range", e.lidar_max_range),
        scalar("env", "rng_seed", e.rng_seed),
        scalar("env", "player_x", e.player_x),
        scalar("env", "player_width", e.player_width),
        scalar("env", "player_height", e.player_height),
        scalar("env", "start_y", e.start_y),
        scalar("env", "first_pipe_x", e.first_pipe_x),

        scalar("rollout", "train_episodes", r.train_episodes),
        scalar("rollout", "test_expert_episodes", r.test_expert_episodes),
        scalar("rollout", "test_random_episodes", r.test_random_episodes),
        scalar("rollout", "train_seed", r.train_seed),
        scalar("rollout", "test_expert_seed", r.test_expert_seed),
        scalar("rollout", "test_random_seed", r.test_random_seed),
        scalar("rollout", "max_length", r.max_length),
        scalar("rollout", "epsilon", r.epsilon),
        scalar("rollout", "p_flap", r.p_flap),
        scalar("rollout", "margin", r.margin),

        scalar("autoencoder", "epochs", a.epochs),
        scalar("autoencoder", "batch_size", a.batch_size),
        scalar("autoencoder", "lr", a.lr),
        scalar("autoencoder", "clip_norm", a.clip_norm),
        scalar("autoencoder", "seed", a.seed),
        scalar("autoencoder", "max_samples", a.max_samples),

        scalar("worldmodel", "hidden", w.hidden),
        scalar("worldmodel", "lambda", w.lambda),
        scalar("worldmodel", "epochs", w.epochs),
        scalar("worldmodel", "seed", w.seed),
        scalar("worldmodel", "lr", w.lr),
        scalar("worldmodel", "beta1", w.beta1),
        scalar("worldmodel", "beta2", w.beta2),
        scalar("worldmodel", "eps", w.eps),
        scalar("worldmodel", "clip_norm", w.clip_norm),
        boolean("worldmodel", "sample_latents", w.sample_latents),

        list("eval", "lambdas", v.lambdas),
        list("eval", "hidden_sizes", v.hidden_sizes),
        list("eval", "seeds", v.seeds),
        list("eval", "cutoffs", v.cutoffs),
        scalar("eval", "drift_steps", v.drift_steps),
        scalar("eval", "drift_seed", v.drift_seed),
        scalar("eval", "baseline_seed", v.baseline_seed),
        scalar("eval", "baselines", v.baselines),
        scalar("eval", "probe_reg", v.probe_reg),

        {"cli", "out", [&c](const std::string& s) { c.out = s; }, [&c] { return c.out; }},
        scalar("cli", "jobs", c.jobs),
    };
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text)
{
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("malformed config: " + std::string(e.what()));
    }
    RunConfig c;
    std::map<std::string, std::map<std::string, Field>> index;
    for (auto& f : fields(c)) index[f.section].emplace(f.key, std::move(f));
    for (const auto& [section, body] : tree) {
        auto s = index.find(section);
        if (s == index.end()) {
            if (!body.data().empty()) throw ConfigError("config key outside a section: " + section);
            throw ConfigError("unknown config section [" + section + "]");
        }
        for (const auto& [key, value] : body) {
            auto f = s->second.find(key);
            if (f == s->second.end()) throw ConfigError("unknown config key " + section + "." + key);
            if (!value.empty()) throw ConfigError("nested value under " + section + "." + key);
            f->second.set(value.data());
        }
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::filesystem::filesystem_error("cannot open config", path, std::make_error_code(std::errc::no_such_file_or_directory));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void RunConfig::validate() const
{
    try {
        env.validate();
    } catch (const env::ConfigError& e) {
        throw ConfigError(e.what());
    }
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(rollout.train_episodes >= 1, "rollout.train_episodes must be >= 1");
    require(rollout.test_expert_episodes >= 0 && rollout.test_random_episodes >= 0, "test episode counts must be >= 0");
    require(rollout.max_length >= 1, "rollout.max_length must be >= 1");
    require(rollout.epsilon >= 0 && rollout.epsilon <= 1, "rollout.epsilon must lie in [0, 1]");
    require(rollout.p_flap >= 0 && rollout.p_flap <= 1, "rollout.p_flap must lie in [0, 1]");
    require(autoencoder.epochs >= 0 && autoencoder.batch_size >= 1, "autoencoder epochs/batch_size out of range");
    require(autoencoder.lr > 0, "autoencoder.lr must be > 0");
    require(worldmodel.hidden >= 1, "worldmodel.hidden must be >= 1");
    require(worldmodel.lambda >= 0, "worldmodel.lambda must be >= 0");
    require(worldmodel.epochs >= 0, "worldmodel.epochs must be >= 0");
    require(worldmodel.lr > 0, "worldmodel.lr must be > 0");
    for (double l : eval.lambdas) require(l >= 0, "eval.lambdas must be >= 0");
    for (int h : eval.hidden_sizes) require(h >= 1, "eval.hidden_sizes must be >= 1");
    for (std::size_t i = 1; i < eval.hidden_sizes.size(); ++i) {
        require(eval.hidden_sizes[i] > eval.hidden_sizes[i - 1], "eval.hidden_sizes must be ascending");
    }
    for (int c : eval.cutoffs) require(c >= 1, "eval.cutoffs must be >= 1");
    require(eval.drift_steps >= 1, "eval.drift_steps must be >= 1");
    require(eval.baselines >= 1, "eval.baselines must be >= 1");
    require(jobs >= 0, "cli.jobs must be >= 0");
}

std::string RunConfig::to_ini() const
{
    RunConfig copy = *this;
    std::string out, section;
    for (const auto& f : fields(copy)) {
        if (section != f.section) {
            out += (section.empty() ? "[" : "\n[") + std::string(f.section) + "]\n";
            section = f.section;
        }
        out += std::string(f.key) + " = " + f.get() + "\n";
    }
    return out;
}

std::uint64_t RunConfig::digest(std::initializer_list<const char*> sections) const
{
    RunConfig copy = *this;
    const std::set<std::string> wanted(sections.begin(), sections.end());
    Digest d;
    for (const auto& f : fields(copy)) {
        if (!wanted.contains(f.section)) continue;
        d.add(std::string(f.section) + "." + f.key + "=" + f.get() + "\n");
    }
    return d.value();
}

std::uint64_t RunConfig::digest() const
{
    return digest({"env", "rollout", "autoencoder", "worldmodel", "eval"});
}

}  // namespace fbwm::cli

#include "fbwm/cli/artifacts.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fbwm/checkpoint.hpp"
#include "fbwm/cli/csv.hpp"

namespace fbwm::cli {

fs::path Layout::dataset(rollout::Split split) const
{
    return data / (std::string(rollout::to_string(split)) + ".fbwm");
}

Layout make_layout(const fs::path& out, const std::optional<fs::path>& data)
{
    Layout l{out, out / "data"};
    if (data) {
        l.data = *data;
    } else if (const char* env = std::getenv("WM_DATA_DIR"); env && *env) {
        l.data = env;
    }
    return l;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CliError(kExitFailure, "io", "cannot write " + path.string());
        out << text;
        if (!out) throw CliError(kExitFailure, "io", "write failed for " + path.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError(kExitMissingFile, "missing_file", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_wm_metrics(const fs::path& path, const std::vector<wm::EpochMetrics>& metrics)
{
    std::ostringstream os;
    CsvWriter csv(os, kWmMetricsHeader);
    for (const auto& m : metrics) {
        csv.cell(m.epoch).cell(m.train_pred_loss).cell(m.train_probe_loss).cell(m.test_pred_loss);
        csv.cell(m.diverged ? 1 : 0).cell(m.test_pred_expert).cell(m.test_pred_random);
        csv.end_row();
    }
    write_text(path, os.str());
}

namespace {

double to_double(const std::string& s)
{
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("not a number: " + s);
    return v;
}

}  // namespace

std::vector<wm::EpochMetrics> read_wm_metrics(const fs::path& path)
{
    if (!fs::exists(path)) throw CliError(kExitMissingFile, "missing_file", "missing " + path.string());
    const CsvTable t = read_csv(path);
    if (t.header != kWmMetricsHeader) throw CliError(kExitBadFormat, "bad_format", path.string() + ": unexpected header");
    std::vector<wm::EpochMetrics> out;
    try {
        for (const auto& r : t.rows) {
            wm::EpochMetrics m;
            m.epoch = std::stoi(r[0]);
            m.train_pred_loss = to_double(r[1]);
            m.train_probe_loss = to_double(r[2]);
            m.test_pred_loss = to_double(r[3]);
            m.diverged = r[4] == "1";
            m.test_pred_expert = to_double(r[5]);
            m.test_pred_random = to_double(r[6]);
            out.push_back(m);
        }
    } catch (const std::logic_error& e) {
        throw CliError(kExitBadFormat, "bad_format", path.string() + ": " + e.what());
    }
    return out;
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

fs::path meta_path(const fs::path& artifact)
{
    return artifact.string() + ".meta.json";
}

void write_meta(const fs::path& artifact, const Meta& meta)
{
    nlohmann::json j;
    j["artifact"] = meta.artifact;
    j["config_digest"] = hex(meta.config_digest);
    j["stage_digest"] = hex(meta.stage_digest);
    j["seed"] = meta.seed;
    j["code_version"] = code_version();
    j["command"] = meta.command;
    write_text(meta_path(artifact), j.dump(2) + "\n");
}

std::optional<Meta> read_meta(const fs::path& artifact)
{
    const fs::path p = meta_path(artifact);
    if (!fs::exists(p)) return std::nullopt;
    try {
        const auto j = nlohmann::json::parse(read_text(p));
        Meta m;
        m.artifact = j.at("artifact").get<std::string>();
        m.config_digest = std::stoull(j.at("config_digest").get<std::string>(), nullptr, 16);
        m.stage_digest = std::stoull(j.at("stage_digest").get<std::string>(), nullptr, 16);
        m.seed = j.at("seed").get<std::uint64_t>();
        m.command = j.at("command").get<std::vector<std::string>>();
        return m;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

bool up_to_date(const fs::path& artifact, std::uint64_t stage_digest)
{
    if (!fs::exists(artifact)) return false;
    const auto m = read_meta(artifact);
    return m && m->stage_digest == stage_digest;
}

RunConfig config_for(const RunConfig& base, const eval::RunKey& key)
{
    RunConfig c = base;
    c.worldmodel.lambda = key.lambda;
    c.worldmodel.hidden = key.hidden;
    c.worldmodel.seed = key.seed;
    return c;
}

eval::RunRecord load_run(const Layout& layout, const RunConfig& config, const eval::RunKey& key, bool with_model)
{
    const fs::path dir = layout.wm_dir(key);
    const fs::path ckpt_path = dir / "model.ckpt";
    const fs::path metrics_path = dir / "metrics.csv";
    if (!fs::exists(metrics_path)) {
        throw CliError(kExitMissingFile, "missing_file", "no trained run " + eval::run_tag(key) + " in " + dir.string());
    }
    const std::uint64_t want = config_for(config, key).worldmodel_digest();
    const auto meta = read_meta(metrics_path);
    if (!meta || meta->stage_digest != want) {
        throw CliError(kExitDigestMismatch, "digest_mismatch",
                       "run " + eval::run_tag(key) + " was trained with a different configuration");
    }
    eval::RunRecord rec{key, {wm::WorldModel(key.hidden, key.lambda), read_wm_metrics(metrics_path), false, 0, {}}};
    if (!rec.result.metrics.empty() && rec.result.metrics.back().diverged) {
        rec.result.diverged = true;
        rec.result.divergence_epoch = rec.result.metrics.back().epoch;
        rec.result.divergence_reason = "recorded in metrics";
    }
    if (with_model) {
        if (!fs::exists(ckpt_path)) throw CliError(kExitMissingFile, "missing_file", "missing " + ckpt_path.string());
        const auto ck = checkpoint::Checkpoint::load(ckpt_path);
        if (ck.config_digest != want) {
            throw CliError(kExitDigestMismatch, "digest_mismatch", ckpt_path.string() + " has a different config digest");
        }
        rec.result.model = wm::WorldModel::from_checkpoint(ck);
    }
    return rec;
}

}  // namespace fbwm::cli

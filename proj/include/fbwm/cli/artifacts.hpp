#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbwm/cli/cli.hpp"
#include "fbwm/cli/config.hpp"
#include "fbwm/eval/sweep.hpp"
#include "fbwm/rollout.hpp"
#include "fbwm/worldmodel.hpp"

namespace fbwm::cli {

namespace fs = std::filesystem;

struct CliError : std::runtime_error {
    CliError(ExitCode c, std::string kind, const std::string& what)
        : std::runtime_error(what), code(c), name(std::move(kind))
    {
    }
    ExitCode code;
    std::string name;
};

// On-disk layout of a run directory.
struct Layout {
    fs::path out;
    fs::path data;

    fs::path dataset(rollout::Split split) const;
    fs::path ae_dir() const { return out / "autoencoder"; }
    fs::path ae_checkpoint() const { return ae_dir() / "model.ckpt"; }
    fs::path ae_metrics() const { return ae_dir() / "metrics.csv"; }
    fs::path wm_root() const { return out / "worldmodel"; }
    fs::path wm_dir(const eval::RunKey& key) const { return wm_root() / eval::run_tag(key); }
    fs::path eval_dir() const { return out / "eval"; }
};

// Data directory: explicit override, else $WM_DATA_DIR, else <out>/data.
Layout make_layout(const fs::path& out, const std::optional<fs::path>& data);

inline const std::vector<std::string> kWmMetricsHeader = {
    "epoch", "train_pred_loss", "train_probe_loss", "test_pred_loss", "diverged_flag", "test_pred_loss_expert",
    "test_pred_loss_random"};

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

void write_wm_metrics(const fs::path& path, const std::vector<wm::EpochMetrics>& metrics);
std::vector<wm::EpochMetrics> read_wm_metrics(const fs::path& path);

// Sidecar "<artifact>.meta.json" with config digest, stage digest, seed, code
// version and the producing command line.
struct Meta {
    std::string artifact;
    std::uint64_t config_digest = 0;
    std::uint64_t stage_digest = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> command;
};

fs::path meta_path(const fs::path& artifact);
void write_meta(const fs::path& artifact, const Meta& meta);
std::optional<Meta> read_meta(const fs::path& artifact);

// True when the artifact and its sidecar exist and the sidecar's stage digest
// matches.
bool up_to_date(const fs::path& artifact, std::uint64_t stage_digest);

std::string hex(std::uint64_t v);

// The world-model training config of one sweep key.
RunConfig config_for(const RunConfig& base, const eval::RunKey& key);

// Loads a trained run (metrics and, if requested, the checkpoint) and checks
// that it was produced from `config`.
eval::RunRecord load_run(const Layout& layout, const RunConfig& config, const eval::RunKey& key, bool with_model);

}  // namespace fbwm::cli

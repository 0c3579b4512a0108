#include "fbwm/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include "fbwm/checkpoint.hpp"
#include "fbwm/cli/artifacts.hpp"
#include "fbwm/cli/csv.hpp"
#include "fbwm/cli/svg.hpp"
#include "fbwm/eval/decodability.hpp"
#include "fbwm/eval/drift.hpp"
#include "fbwm/parallel.hpp"

#ifndef FBWM_CODE_VERSION
#define FBWM_CODE_VERSION "dev"
#endif

namespace fbwm::cli {

const char* code_version() { return FBWM_CODE_VERSION; }

namespace {

struct Options {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::string> data;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<double> lambda;
    std::optional<int> hidden;
    std::optional<int> epochs;
    bool resume = false;
    std::string run_dir;  // report only
};

struct Context {
    RunConfig config;
    Layout layout;
    int jobs = 1;
    bool resume = false;
    std::vector<std::string> command;

    Meta meta(const std::string& artifact, std::uint64_t stage, std::uint64_t seed) const
    {
        return {artifact, config.digest(), stage, seed, command};
    }
};

const rollout::Split kSplits[] = {rollout::Split::Train, rollout::Split::TestExpert, rollout::Split::TestRandom};

void say(const std::string& line) { std::cout << line << std::endl; }

eval::SweepGrid grid_of(const RunConfig& c)
{
    return {c.eval.lambdas, c.eval.hidden_sizes, c.eval.seeds};
}

std::string csv_text(const std::vector<std::string>& header, const std::function<void(CsvWriter&)>& rows)
{
    std::ostringstream os;
    CsvWriter w(os, header);
    rows(w);
    return os.str();
}

// --- datasets and latents --------------------------------------------------

rollout::RolloutDataset load_split(const Context& ctx, rollout::Split split)
{
    const fs::path p = ctx.layout.dataset(split);
    if (!fs::exists(p)) {
        throw CliError(kExitMissingFile, "missing_file", "dataset " + p.string() + " not found (run collect first)");
    }
    auto res = rollout::load_dataset(p, ctx.config.env.digest());
    if (res.digest_mismatch) {
        throw CliError(kExitDigestMismatch, "digest_mismatch",
                       p.string() + " was collected with a different environment configuration");
    }
    if (res.dataset.split != split) throw CliError(kExitBadFormat, "bad_format", p.string() + " holds the wrong split");
    return std::move(res.dataset);
}

ae::AutoencoderModel load_autoencoder(const Context& ctx)
{
    const fs::path p = ctx.layout.ae_checkpoint();
    if (!fs::exists(p)) throw CliError(kExitMissingFile, "missing_file", "autoencoder " + p.string() + " not found (run train-ae first)");
    const auto ck = checkpoint::Checkpoint::load(p);
    if (ck.kind != "autoencoder") throw CliError(kExitBadFormat, "bad_format", p.string() + " is not an autoencoder");
    if (ck.attribute("env_digest") != std::to_string(ctx.config.env.digest())) {
        throw CliError(kExitDigestMismatch, "digest_mismatch",
                       p.string() + " was trained under a different environment configuration");
    }
    if (ck.config_digest != ctx.config.autoencoder_digest()) {
        throw CliError(kExitDigestMismatch, "digest_mismatch",
                       p.string() + " was trained with a different data or autoencoder configuration");
    }
    return ae::AutoencoderModel::from_checkpoint(ck);
}

struct Latents {
    std::vector<wm::LatentEpisode> train, test_expert, test_random;

    std::vector<const wm::LatentEpisode*> tests(const std::string& policy) const
    {
        std::vector<const wm::LatentEpisode*> out;
        if (policy != "random") for (const auto& e : test_expert) out.push_back(&e);
        if (policy != "expert") for (const auto& e : test_random) out.push_back(&e);
        return out;
    }
};

Latents load_latents(const Context& ctx, bool with_train)
{
    const auto model = load_autoencoder(ctx);
    Latents l;
    if (with_train) l.train = wm::encode_dataset(model, load_split(ctx, rollout::Split::Train));
    l.test_expert = wm::encode_dataset(model, load_split(ctx, rollout::Split::TestExpert));
    l.test_random = wm::encode_dataset(model, load_split(ctx, rollout::Split::TestRandom));
    return l;
}

// --- subcommands ------------------------------------------------------------

int cmd_collect(const Context& ctx)
{
    const auto& c = ctx.config;
    const auto& r = c.rollout;
    for (auto split : kSplits) {
        const fs::path p = ctx.layout.dataset(split);
        if (ctx.resume && up_to_date(p, c.data_digest())) {
            say("collect: " + p.string() + " up to date");
            continue;
        }
        rollout::PolicySpec policy{split == rollout::Split::TestRandom ? rollout::PolicyTag::Random
                                                                       : rollout::PolicyTag::Expert,
                                   r.epsilon, r.p_flap, r.margin};
        rollout::CollectOptions opts;
        opts.max_length = r.max_length;
        opts.jobs = ctx.jobs;
        switch (split) {
        case rollout::Split::Train: opts.n_episodes = r.train_episodes, opts.base_seed = r.train_seed; break;
        case rollout::Split::TestExpert: opts.n_episodes = r.test_expert_episodes, opts.base_seed = r.test_expert_seed; break;
        case rollout::Split::TestRandom: opts.n_episodes = r.test_random_episodes, opts.base_seed = r.test_random_seed; break;
        }
        const auto ds = rollout::collect(c.env, policy, split, opts);
        fs::create_directories(p.parent_path());
        rollout::save_dataset(ds, p);
        write_meta(p, ctx.meta("dataset", c.data_digest(), opts.base_seed));
        say("collect: wrote " + std::to_string(ds.episodes.size()) + " episodes (" + std::to_string(ds.total_steps()) +
            " steps) to " + p.string());
    }
    return kExitOk;
}

int cmd_train_ae(const Context& ctx)
{
    const auto& c = ctx.config;
    const std::uint64_t stage = c.autoencoder_digest();
    if (ctx.resume && up_to_date(ctx.layout.ae_checkpoint(), stage) && up_to_date(ctx.layout.ae_metrics(), stage)) {
        say("train-ae: " + ctx.layout.ae_checkpoint().string() + " up to date");
        return kExitOk;
    }
    const auto train = load_split(ctx, rollout::Split::Train);
    const auto obs = ae::gather_observations({&train}, c.autoencoder.max_samples, c.autoencoder.seed);
    ae::AeTrainResult res;
    try {
        res = ae::train_autoencoder(obs, c.autoencoder);
    } catch (const ae::DivergenceError& e) {
        throw CliError(kExitFailure, "diverged", e.what());
    }
    auto ck = res.model.to_checkpoint(c.env.digest());
    ck.epoch = static_cast<std::uint32_t>(c.autoencoder.epochs);
    ck.seed = c.autoencoder.seed;
    ck.config_digest = stage;
    fs::create_directories(ctx.layout.ae_dir());
    ck.save(ctx.layout.ae_checkpoint());
    write_meta(ctx.layout.ae_checkpoint(), ctx.meta("autoencoder checkpoint", stage, c.autoencoder.seed));
    write_text(ctx.layout.ae_metrics(), csv_text({"epoch", "loss", "reconstruction_loss"}, [&](CsvWriter& w) {
                   for (const auto& s : res.curve) {
                       w.cell(s.epoch).cell(s.loss).cell(s.reconstruction);
                       w.end_row();
                   }
               }));
    write_meta(ctx.layout.ae_metrics(), ctx.meta("autoencoder metrics", stage, c.autoencoder.seed));
    say("train-ae: " + std::to_string(obs.cols()) + " observations, final loss " +
        format_number(res.curve.empty() ? std::nan("") : res.curve.back().loss));
    return kExitOk;
}

void save_run(const Context& ctx, const eval::RunRecord& rec, std::uint64_t ae_file_digest)
{
    const RunConfig rc = config_for(ctx.config, rec.key);
    const fs::path dir = ctx.layout.wm_dir(rec.key);
    fs::create_directories(dir);
    auto ck = rec.result.model.to_checkpoint();
    ck.epoch = static_cast<std::uint32_t>(rec.result.metrics.size());
    ck.seed = rec.key.seed;
    ck.config_digest = rc.worldmodel_digest();
    ck.attributes["autoencoder_file_digest"] = hex(ae_file_digest);
    if (rec.result.diverged) {
        ck.attributes["divergence_epoch"] = std::to_string(rec.result.divergence_epoch);
        ck.attributes["divergence_reason"] = rec.result.divergence_reason;
    }
    ck.save(dir / "model.ckpt");
    Meta m{"worldmodel checkpoint", rc.digest(), rc.worldmodel_digest(), rec.key.seed, ctx.command};
    write_meta(dir / "model.ckpt", m);
    write_wm_metrics(dir / "metrics.csv", rec.result.metrics);
    m.artifact = "worldmodel metrics";
    write_meta(dir / "metrics.csv", m);
}

bool run_done(const Context& ctx, const eval::RunKey& key)
{
    const std::uint64_t stage = config_for(ctx.config, key).worldmodel_digest();
    const fs::path dir = ctx.layout.wm_dir(key);
    return up_to_date(dir / "model.ckpt", stage) && up_to_date(dir / "metrics.csv", stage);
}

std::vector<eval::RunRecord> train_runs(const Context& ctx, const eval::SweepGrid& grid)
{
    std::vector<eval::RunKey> todo;
    for (const auto& k : grid.keys()) {
        if (ctx.resume && run_done(ctx, k)) {
            say("train-wm: " + eval::run_tag(k) + " up to date");
            continue;
        }
        todo.push_back(k);
    }
    std::vector<eval::RunRecord> trained;
    if (todo.empty()) return trained;
    const Latents lat = load_latents(ctx, true);
    const std::uint64_t ae_digest = checkpoint::file_digest(ctx.layout.ae_checkpoint());
    std::vector<std::optional<eval::RunRecord>> slots(todo.size());
    std::mutex mutex;
    parallel_for(todo.size(), ctx.jobs, [&](std::size_t i) {
        wm::WmTrainConfig cfg = config_for(ctx.config, todo[i]).worldmodel;
        eval::RunRecord rec{todo[i], wm::train_worldmodel(lat.train, lat.test_expert, lat.test_random, cfg)};
        save_run(ctx, rec, ae_digest);
        std::lock_guard lock(mutex);
        const auto& last = rec.result.metrics;
        say("train-wm: " + eval::run_tag(rec.key) + (rec.diverged() ? " diverged at epoch " +
            std::to_string(rec.result.divergence_epoch) : " final test loss " +
            format_number(last.empty() ? std::nan("") : last.back().test_pred_loss)));
        slots[i].emplace(std::move(rec));
    });
    for (auto& s : slots) trained.push_back(std::move(*s));
    return trained;
}

int cmd_train_wm(const Context& ctx)
{
    const auto& w = ctx.config.worldmodel;
    train_runs(ctx, {{w.lambda}, {w.hidden}, {w.seed}});
    return kExitOk;
}

std::vector<eval::RunRecord> load_grid(const Context& ctx, bool with_models)
{
    const auto keys = grid_of(ctx.config).keys();
    std::vector<eval::RunRecord> out;
    for (const auto& k : keys) out.push_back(load_run(ctx.layout, ctx.config, k, with_models));
    return out;
}

std::string mean_curve_svg(const std::vector<eval::RunRecord>& runs, const std::string& title)
{
    LinePlot plot{title, "epoch", "test predictive loss", false, false, {}};
    std::map<std::pair<double, int>, std::map<int, std::vector<double>>> curves;
    for (const auto& r : runs) {
        for (const auto& m : r.result.metrics) {
            if (!m.diverged) curves[{r.key.lambda, r.key.hidden}][m.epoch].push_back(m.test_pred_loss);
        }
    }
    for (const auto& [key, by_epoch] : curves) {
        Series s{"lambda=" + format_number(key.first) + " H=" + std::to_string(key.second), {}, {}, {}};
        for (const auto& [epoch, values] : by_epoch) {
            double mean = 0;
            for (double v : values) mean += v;
            s.x.push_back(epoch);
            s.y.push_back(mean / static_cast<double>(values.size()));
            s.y_err.push_back(values.size() > 1 ? eval::sample_sd(values) : 0.0);
        }
        plot.series.push_back(std::move(s));
    }
    return render_svg(plot);
}

int cmd_sweep(const Context& ctx)
{
    train_runs(ctx, grid_of(ctx.config));
    const auto runs = load_grid(ctx, false);
    const fs::path dir = ctx.layout.out / "sweep";
    const auto meta = ctx.meta("sweep table", ctx.config.worldmodel_digest(), 0);
    write_text(dir / "runs.csv",
               csv_text({"lambda", "hidden", "seed", "epochs", "diverged_flag", "divergence_epoch", "final_train_pred_loss",
                         "final_test_pred_loss"},
                        [&](CsvWriter& w) {
                            for (const auto& r : runs) {
                                w.cell(r.key.lambda).cell(r.key.hidden).cell(r.key.seed).cell(r.epochs_run());
                                w.cell(r.diverged() ? 1 : 0).cell(r.result.divergence_epoch);
                                w.cell(r.final_train_loss()).cell(r.final_test_loss());
                                w.end_row();
                            }
                        }));
    write_meta(dir / "runs.csv", meta);
    const auto summary = eval::summarize_lambda(runs);
    write_text(dir / "lambda_summary.csv",
               csv_text({"lambda", "hidden", "runs", "diverged", "mean_test_pred_loss", "sd_test_pred_loss",
                         "median_test_pred_loss", "mean_train_pred_loss", "sd_train_pred_loss", "median_train_pred_loss"},
                        [&](CsvWriter& w) {
                            for (const auto& s : summary) {
                                w.cell(s.lambda).cell(s.hidden).cell(s.runs).cell(s.diverged);
                                w.cell(s.mean_test).cell(s.sd_test).cell(s.median_test);
                                w.cell(s.mean_train).cell(s.sd_train).cell(s.median_train);
                                w.end_row();
                            }
                        }));
    write_meta(dir / "lambda_summary.csv", meta);
    write_text(dir / "test_loss.svg", mean_curve_svg(runs, "Test predictive loss by lambda"));
    for (const auto& s : summary) {
        say("sweep: lambda=" + format_number(s.lambda) + " H=" + std::to_string(s.hidden) + " median test loss " +
            format_number(s.median_test) + " (" + std::to_string(s.diverged) + "/" + std::to_string(s.runs) +
            " diverged)");
    }
    return kExitOk;
}

int cmd_eval_decode(const Context& ctx)
{
    const auto& c = ctx.config;
    const auto runs = load_grid(ctx, true);
    const Latents lat = load_latents(ctx, false);
    const auto episodes = lat.tests("all");
    const std::optional<double> reg = c.eval.probe_reg >= 0 ? std::optional(c.eval.probe_reg) : std::nullopt;

    std::vector<eval::DecodabilityReport> reports(runs.size());
    std::vector<std::vector<eval::DecodabilityReport>> base_reports(runs.size());
    parallel_for(runs.size(), ctx.jobs, [&](std::size_t i) {
        const auto& model = runs[i].result.model;
        for (int b = 0; b < c.eval.baselines; ++b) {
            const auto twin = wm::WorldModel::create(model.hidden, model.lambda, c.eval.baseline_seed + b);
            auto rep = eval::decodability_report(model, twin, episodes, reg);
            if (b == 0) reports[i] = rep;
            base_reports[i].push_back(std::move(rep));
        }
    });

    const fs::path dir = ctx.layout.eval_dir();
    std::vector<std::string> header = {"lambda", "hidden", "seed", "feature", "name", "trained_feature", "r2", "mse",
                                       "baseline_r2", "baseline_mse", "degenerate_flag", "fit_rows", "eval_rows"};
    // (lambda, hidden, feature) -> r2 values, baseline values
    std::map<std::tuple<double, int, int>, std::pair<std::vector<double>, std::vector<double>>> agg;
    write_text(dir / "decode.csv", csv_text(header, [&](CsvWriter& w) {
                   for (std::size_t i = 0; i < runs.size(); ++i) {
                       for (std::size_t k = 0; k < reports[i].features.size(); ++k) {
                           const auto& f = reports[i].features[k];
                           double br2 = 0, bmse = 0;
                           for (const auto& b : base_reports[i]) {
                               br2 += b.features[k].baseline.r2;
                               bmse += b.features[k].baseline.mse;
                           }
                           br2 /= static_cast<double>(base_reports[i].size());
                           bmse /= static_cast<double>(base_reports[i].size());
                           w.cell(runs[i].key.lambda).cell(runs[i].key.hidden).cell(runs[i].key.seed);
                           w.cell(f.feature).cell(f.name).cell(f.trained_feature && runs[i].key.lambda > 0 ? 1 : 0);
                           w.cell(f.model.r2).cell(f.model.mse).cell(br2).cell(bmse);
                           w.cell(f.model.degenerate ? 1 : 0);
                           w.cell(static_cast<std::uint64_t>(reports[i].fit_rows));
                           w.cell(static_cast<std::uint64_t>(reports[i].eval_rows));
                           w.end_row();
                           auto& a = agg[{runs[i].key.lambda, runs[i].key.hidden, f.feature}];
                           a.first.push_back(f.model.r2);
                           a.second.push_back(br2);
                       }
                   }
               }));
    const auto meta = ctx.meta("decodability table", c.digest(), c.eval.baseline_seed);
    write_meta(dir / "decode.csv", meta);
    write_text(dir / "decode_summary.csv",
               csv_text({"lambda", "hidden", "feature", "name", "mean_r2", "sd_r2", "mean_baseline_r2"}, [&](CsvWriter& w) {
                   for (const auto& [key, vals] : agg) {
                       const auto [l, h, k] = key;
                       double m = 0, mb = 0;
                       for (double v : vals.first) m += v;
                       for (double v : vals.second) mb += v;
                       w.cell(l).cell(h).cell(k).cell(env::feature_name(k));
                       w.cell(m / static_cast<double>(vals.first.size())).cell(eval::sample_sd(vals.first));
                       w.cell(mb / static_cast<double>(vals.second.size()));
                       w.end_row();
                   }
               }));
    write_meta(dir / "decode_summary.csv", meta);

    LinePlot plot{"Held-out probe R2 per world feature", "feature index", "R2", false, false, {}};
    std::map<std::pair<double, int>, Series> series;
    Series base{"untrained", {}, {}, {}};
    for (const auto& [key, vals] : agg) {
        const auto [l, h, k] = key;
        auto& s = series[{l, h}];
        s.name = "lambda=" + format_number(l) + " H=" + std::to_string(h);
        double m = 0;
        for (double v : vals.first) m += v;
        s.x.push_back(k);
        s.y.push_back(m / static_cast<double>(vals.first.size()));
        s.y_err.push_back(vals.first.size() > 1 ? eval::sample_sd(vals.first) : 0.0);
        if (l == c.eval.lambdas.front() && h == c.eval.hidden_sizes.front()) {
            double mb = 0;
            for (double v : vals.second) mb += v;
            base.x.push_back(k);
            base.y.push_back(mb / static_cast<double>(vals.second.size()));
        }
    }
    for (auto& [key, s] : series) plot.series.push_back(std::move(s));
    plot.series.push_back(std::move(base));
    write_text(dir / "decode.svg", render_svg(plot));
    say("eval-decode: " + std::to_string(runs.size()) + " runs, " + std::to_string(episodes.size()) + " test episodes");
    return kExitOk;
}

int cmd_eval_drift(const Context& ctx)
{
    const auto& c = ctx.config;
    const auto runs = load_grid(ctx, true);
    const Latents lat = load_latents(ctx, false);
    const std::vector<std::string> policies = {"expert", "random", "all"};
    struct Job {
        std::size_t run;
        int cutoff;
        std::size_t policy;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (int cut : c.eval.cutoffs) {
            for (std::size_t p = 0; p < policies.size(); ++p) jobs.push_back({i, cut, p});
        }
    }
    std::vector<eval::DriftCurve> curves(jobs.size());
    parallel_for(jobs.size(), ctx.jobs, [&](std::size_t j) {
        const auto& job = jobs[j];
        const auto eps = lat.tests(policies[job.policy]);
        curves[j] = eval::drift_experiment(runs[job.run].result.model, eps, job.cutoff,
                                           c.eval.drift_seed + runs[job.run].key.seed, 2 * c.eval.drift_steps);
    });
    const fs::path dir = ctx.layout.eval_dir();
    const auto meta = ctx.meta("drift table", c.digest(), c.eval.drift_seed);
    write_text(dir / "drift.csv", csv_text({"lambda", "hidden", "seed", "cutoff", "policy", "t", "episodes", "mean_nll",
                                            "sd_nll", "mean_open_nll", "sd_open_nll"},
                                           [&](CsvWriter& w) {
                                               for (std::size_t j = 0; j < jobs.size(); ++j) {
                                                   const auto& k = runs[jobs[j].run].key;
                                                   for (const auto& p : curves[j].points) {
                                                       w.cell(k.lambda).cell(k.hidden).cell(k.seed).cell(jobs[j].cutoff);
                                                       w.cell(policies[jobs[j].policy]).cell(p.t).cell(p.episodes);
                                                       w.cell(p.mean_nll).cell(p.sd_nll).cell(p.mean_open).cell(p.sd_open);
                                                       w.end_row();
                                                   }
                                               }
                                           }));
    write_meta(dir / "drift.csv", meta);
    write_text(dir / "drift_growth.csv",
               csv_text({"lambda", "hidden", "seed", "cutoff", "policy", "steps", "growth"}, [&](CsvWriter& w) {
                   for (std::size_t j = 0; j < jobs.size(); ++j) {
                       const auto& k = runs[jobs[j].run].key;
                       w.cell(k.lambda).cell(k.hidden).cell(k.seed).cell(jobs[j].cutoff).cell(policies[jobs[j].policy]);
                       w.cell(c.eval.drift_steps).cell(eval::drift_growth(curves[j], c.eval.drift_steps));
                       w.end_row();
                   }
               }));
    write_meta(dir / "drift_growth.csv", meta);

    for (int cut : c.eval.cutoffs) {
        LinePlot plot{"Closed-loop NLL after cutoff t=" + std::to_string(cut), "t", "NLL of true next latent", false,
                      false, {}};
        std::map<std::pair<double, int>, std::map<int, std::vector<double>>> acc;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].cutoff != cut || policies[jobs[j].policy] != "all") continue;
            const auto& k = runs[jobs[j].run].key;
            for (const auto& p : curves[j].points) acc[{k.lambda, k.hidden}][p.t].push_back(p.mean_nll);
        }
        for (const auto& [key, by_t] : acc) {
            Series s{"lambda=" + format_number(key.first) + " H=" + std::to_string(key.second), {}, {}, {}};
            for (const auto& [t, v] : by_t) {
                double m = 0;
                for (double x : v) m += x;
                s.x.push_back(t);
                s.y.push_back(m / static_cast<double>(v.size()));
            }
            plot.series.push_back(std::move(s));
        }
        write_text(dir / ("drift_c" + std::to_string(cut) + ".svg"), render_svg(plot));
    }
    say("eval-drift: " + std::to_string(runs.size()) + " runs, cutoffs " + std::to_string(c.eval.cutoffs.size()));
    return kExitOk;
}

int cmd_eval_scaling(const Context& ctx)
{
    const auto& c = ctx.config;
    const auto runs = load_grid(ctx, false);
    const auto table = eval::scaling_table(runs, c.worldmodel.epochs);
    const fs::path dir = ctx.layout.eval_dir();
    const auto meta = ctx.meta("scaling table", c.digest(), 0);
    write_text(dir / "scaling_size.csv",
               csv_text({"lambda", "hidden", "seed", "diverged_flag", "mid_epoch", "mid_test_pred_loss", "final_epoch",
                         "final_test_pred_loss"},
                        [&](CsvWriter& w) {
                            for (const auto& r : table) {
                                w.cell(r.key.lambda).cell(r.key.hidden).cell(r.key.seed).cell(r.diverged ? 1 : 0);
                                w.cell(r.mid_epoch).cell(r.mid_test_loss).cell(r.final_epoch).cell(r.final_test_loss);
                                w.end_row();
                            }
                        }));
    write_meta(dir / "scaling_size.csv", meta);
    write_text(dir / "scaling_epoch.csv",
               csv_text({"lambda", "hidden", "seed", "epoch", "test_pred_loss", "diverged_flag"}, [&](CsvWriter& w) {
                   for (const auto& r : runs) {
                       for (const auto& m : r.result.metrics) {
                           w.cell(r.key.lambda).cell(r.key.hidden).cell(r.key.seed).cell(m.epoch);
                           w.cell(m.test_pred_loss).cell(m.diverged ? 1 : 0);
                           w.end_row();
                       }
                   }
               }));
    write_meta(dir / "scaling_epoch.csv", meta);

    // Predictive losses here are NLLs and may be negative, so the size plot
    // uses a log x axis only.
    LinePlot size_plot{"Final test loss vs hidden size", "hidden size", "median test predictive loss", true, false, {}};
    for (double l : c.eval.lambdas) {
        Series s{"lambda=" + format_number(l), {}, {}, {}};
        for (int h : c.eval.hidden_sizes) {
            std::vector<double> v;
            for (const auto& r : table) {
                if (r.key.lambda == l && r.key.hidden == h && !r.diverged) v.push_back(r.final_test_loss);
            }
            s.x.push_back(h);
            s.y.push_back(eval::median(v));
        }
        size_plot.series.push_back(std::move(s));
    }
    write_text(dir / "scaling_size.svg", render_svg(size_plot));
    LinePlot epoch_plot{"Test loss vs epoch", "epoch", "median test predictive loss", true, false, {}};
    {
        std::map<std::pair<double, int>, std::map<int, std::vector<double>>> acc;
        for (const auto& r : runs) {
            for (const auto& m : r.result.metrics) {
                if (!m.diverged) acc[{r.key.lambda, r.key.hidden}][m.epoch].push_back(m.test_pred_loss);
            }
        }
        for (const auto& [key, by_epoch] : acc) {
            Series s{"lambda=" + format_number(key.first) + " H=" + std::to_string(key.second), {}, {}, {}};
            for (const auto& [e, v] : by_epoch) {
                s.x.push_back(e);
                s.y.push_back(eval::median(v));
            }
            epoch_plot.series.push_back(std::move(s));
        }
    }
    write_text(dir / "scaling_epoch.svg", render_svg(epoch_plot));
    say("eval-scaling: " + std::to_string(runs.size()) + " runs");
    return kExitOk;
}

int cmd_eval_stability(const Context& ctx)
{
    const auto& c = ctx.config;
    const auto runs = load_grid(ctx, false);
    const auto groups = eval::stability_report(runs, c.worldmodel.epochs);
    const fs::path dir = ctx.layout.eval_dir();
    write_text(dir / "stability.csv",
               csv_text({"lambda", "hidden", "seeds", "survived", "survival_fraction", "final_epoch", "divergence_epochs"},
                        [&](CsvWriter& w) {
                            for (const auto& g : groups) {
                                std::string epochs;
                                for (std::size_t i = 0; i < g.divergence_epochs.size(); ++i) {
                                    epochs += (i ? ";" : "") + std::to_string(g.divergence_epochs[i]);
                                }
                                w.cell(g.lambda).cell(g.hidden).cell(g.seeds).cell(g.survived);
                                w.cell(g.survival_fraction()).cell(g.final_epoch).cell(epochs);
                                w.end_row();
                            }
                        }));
    write_meta(dir / "stability.csv", ctx.meta("stability table", c.digest(), 0));
    LinePlot plot{"Runs surviving to the final epoch", "hidden size", "survival fraction", false, false, {}};
    for (double l : c.eval.lambdas) {
        Series s{"lambda=" + format_number(l), {}, {}, {}};
        for (const auto& g : groups) {
            if (g.lambda == l) {
                s.x.push_back(g.hidden);
                s.y.push_back(g.survival_fraction());
            }
        }
        plot.series.push_back(std::move(s));
    }
    write_text(dir / "stability.svg", render_svg(plot));
    for (const auto& g : groups) {
        say("eval-stability: lambda=" + format_number(g.lambda) + " H=" + std::to_string(g.hidden) + " survived " +
            std::to_string(g.survived) + "/" + std::to_string(g.seeds));
    }
    return kExitOk;
}

std::string markdown_table(const fs::path& csv)
{
    const CsvTable t = read_csv(csv);
    std::string s = "|";
    for (const auto& h : t.header) s += " " + h + " |";
    s += "\n|";
    for (std::size_t i = 0; i < t.header.size(); ++i) s += "---|";
    s += "\n";
    for (const auto& r : t.rows) {
        s += "|";
        for (const auto& cell : r) s += " " + cell + " |";
        s += "\n";
    }
    return s;
}

int cmd_report(const fs::path& run_dir)
{
    const fs::path wm_root = run_dir / "worldmodel";
    std::vector<fs::path> run_dirs;
    if (fs::is_directory(wm_root)) {
        for (const auto& e : fs::directory_iterator(wm_root)) {
            if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) run_dirs.push_back(e.path());
        }
    }
    if (run_dirs.empty()) throw CliError(kExitNoRuns, "no_runs", "no runs found in " + run_dir.string());
    std::sort(run_dirs.begin(), run_dirs.end());

    std::string doc = "# Run report\n\n";
    if (fs::exists(run_dir / "autoencoder" / "metrics.csv")) {
        const auto t = read_csv(run_dir / "autoencoder" / "metrics.csv");
        if (!t.rows.empty()) {
            doc += "## Autoencoder\n\nEpochs: " + t.rows.back()[0] + ", final loss " + t.rows.back()[1] +
                   ", reconstruction " + t.rows.back()[2] + "\n\n";
        }
    }
    doc += "## World-model runs\n\n| run | epochs | diverged | final train loss | final test loss | test expert | test random |\n"
           "|---|---|---|---|---|---|---|\n";
    for (const auto& d : run_dirs) {
        const auto m = read_wm_metrics(d / "metrics.csv");
        if (m.empty()) continue;
        const auto& last = m.back();
        doc += "| " + d.filename().string() + " | " + std::to_string(last.epoch) + " | " + (last.diverged ? "yes" : "no") +
               " | " + format_number(last.train_pred_loss) + " | " + format_number(last.test_pred_loss) + " | " +
               format_number(last.test_pred_expert) + " | " + format_number(last.test_pred_random) + " |\n";
    }
    const std::pair<const char*, fs::path> sections[] = {
        {"Loss by lambda", run_dir / "sweep" / "lambda_summary.csv"},
        {"Decodability", run_dir / "eval" / "decode_summary.csv"},
        {"Drift growth", run_dir / "eval" / "drift_growth.csv"},
        {"Scaling", run_dir / "eval" / "scaling_size.csv"},
        {"Stability", run_dir / "eval" / "stability.csv"},
    };
    for (const auto& [title, path] : sections) {
        if (fs::exists(path)) doc += "\n## " + std::string(title) + "\n\n" + markdown_table(path);
    }
    write_text(run_dir / "report.md", doc);
    say("report: " + std::to_string(run_dirs.size()) + " runs summarized in " + (run_dir / "report.md").string());
    return kExitOk;
}

// --- option plumbing --------------------------------------------------------

void add_common(CLI::App* sub, Options& o)
{
    sub->add_option("--config", o.config, "INI run configuration");
    sub->add_option("--out", o.out, "Output directory (overrides [cli] out)");
    sub->add_option("--data", o.data, "Dataset directory (default: $WM_DATA_DIR, else <out>/data)");
    sub->add_option("--seed", o.seed, "Seed of this subcommand's main random stream");
    sub->add_option("--jobs", o.jobs, "Worker threads (default: logical CPU count)")->check(CLI::PositiveNumber);
    sub->add_option("--lambda", o.lambda, "Probe-loss weight")->check(CLI::NonNegativeNumber);
    sub->add_option("--hidden", o.hidden, "LSTM hidden size")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    sub->add_flag("--resume", o.resume, "Reuse outputs whose recorded digest matches the configuration");
}

Context make_context(const std::string& command, const Options& o, const std::vector<std::string>& args)
{
    Context ctx;
    if (o.config) {
        if (!fs::exists(*o.config)) throw CliError(kExitMissingFile, "missing_file", "config " + *o.config + " not found");
        ctx.config = RunConfig::load(*o.config);
    }
    RunConfig& c = ctx.config;
    if (o.out) c.out = *o.out;
    if (o.jobs) c.jobs = *o.jobs;
    const bool grid = command == "sweep" || command.rfind("eval-", 0) == 0;
    if (o.seed) {
        if (command == "collect") c.rollout.train_seed = *o.seed;
        else if (command == "train-ae") c.autoencoder.seed = *o.seed;
        else if (command == "train-wm") c.worldmodel.seed = *o.seed;
        else c.eval.seeds = {*o.seed};
    }
    if (o.lambda) {
        c.worldmodel.lambda = *o.lambda;
        if (grid) c.eval.lambdas = {*o.lambda};
    }
    if (o.hidden) {
        c.worldmodel.hidden = *o.hidden;
        if (grid) c.eval.hidden_sizes = {*o.hidden};
    }
    if (o.epochs) (command == "train-ae" ? c.autoencoder.epochs : c.worldmodel.epochs) = *o.epochs;
    c.validate();
    ctx.layout = make_layout(c.out, o.data ? std::optional<fs::path>(*o.data) : std::nullopt);
    ctx.jobs = c.jobs > 0 ? c.jobs : default_jobs();
    ctx.resume = o.resume;
    ctx.command = args;
    return ctx;
}

void print_error(const std::string& kind, int code, const std::string& message)
{
    nlohmann::json j;
    j["error"] = kind;
    j["exit"] = code;
    j["message"] = message;
    std::cerr << j.dump() << std::endl;
}

}  // namespace

int run_cli(const std::vector<std::string>& args)
{
    CLI::App app{"Flappy Bird LIDAR world models: data collection, training and evaluation", "fbwm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", code_version());
    Options o;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"collect", "Collect training and test rollouts"},
        {"train-ae", "Train the observation autoencoder"},
        {"train-wm", "Train one world model"},
        {"sweep", "Train the (lambda, hidden, seed) grid"},
        {"eval-decode", "Post-hoc probe decodability of world features"},
        {"eval-drift", "Closed-loop drift after environment cutoff"},
        {"eval-scaling", "Loss versus hidden size and epoch"},
        {"eval-stability", "Divergence and survival statistics"},
        {"report", "Summarize a run directory"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        subs[name] = app.add_subcommand(name, help);
        if (name == "report") {
            subs[name]->add_option("run_dir", o.run_dir, "Run directory (default: [cli] out)");
            subs[name]->add_option("--config", o.config, "INI run configuration");
            subs[name]->add_option("--out", o.out, "Run directory");
        } else {
            add_common(subs[name], o);
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        if (rc != 0) print_error("usage", kExitUsage, e.what());
        return rc == 0 ? kExitOk : kExitUsage;
    }

    std::string command;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) command = name;
    }
    try {
        if (command == "report") {
            fs::path dir = o.run_dir;
            if (dir.empty()) {
                RunConfig c = o.config ? RunConfig::load(*o.config) : RunConfig{};
                dir = o.out ? fs::path(*o.out) : fs::path(c.out);
            }
            return cmd_report(dir);
        }
        const Context ctx = make_context(command, o, args);
        if (command == "collect") return cmd_collect(ctx);
        if (command == "train-ae") return cmd_train_ae(ctx);
        if (command == "train-wm") return cmd_train_wm(ctx);
        if (command == "sweep") return cmd_sweep(ctx);
        if (command == "eval-decode") return cmd_eval_decode(ctx);
        if (command == "eval-drift") return cmd_eval_drift(ctx);
        if (command == "eval-scaling") return cmd_eval_scaling(ctx);
        if (command == "eval-stability") return cmd_eval_stability(ctx);
        throw CliError(kExitUsage, "usage", "unknown subcommand");
    } catch (const CliError& e) {
        print_error(e.name, e.code, e.what());
        return e.code;
    } catch (const ConfigError& e) {
        print_error("bad_config", kExitBadConfig, e.what());
        return kExitBadConfig;
    } catch (const rollout::DatasetError& e) {
        const bool io = e.code == rollout::DatasetErrorCode::Io;
        print_error(io ? "missing_file" : "bad_format", io ? kExitMissingFile : kExitBadFormat, e.what());
        return io ? kExitMissingFile : kExitBadFormat;
    } catch (const checkpoint::CheckpointError& e) {
        const bool io = e.code == checkpoint::CheckpointErrorCode::Io;
        print_error(io ? "missing_file" : "bad_format", io ? kExitMissingFile : kExitBadFormat, e.what());
        return io ? kExitMissingFile : kExitBadFormat;
    } catch (const fs::filesystem_error& e) {
        print_error("missing_file", kExitMissingFile, e.what());
        return kExitMissingFile;
    } catch (const std::exception& e) {
        print_error("failure", kExitFailure, e.what());
        return kExitFailure;
    }
}

int run_cli(int argc, const char* const* argv)
{
    return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace fbwm::cli

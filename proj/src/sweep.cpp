#include "fbwm/eval/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "fbwm/parallel.hpp"

namespace fbwm::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string compact(double v)
{
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

std::string run_tag(const RunKey& key)
{
    return "l" + compact(key.lambda) + "_h" + std::to_string(key.hidden) + "_s" + std::to_string(key.seed);
}

double RunRecord::final_test_loss() const
{
    if (result.diverged || result.metrics.empty()) return kNaN;
    return result.metrics.back().test_pred_loss;
}

double RunRecord::final_train_loss() const
{
    if (result.diverged || result.metrics.empty()) return kNaN;
    return result.metrics.back().train_pred_loss;
}

std::vector<RunKey> SweepGrid::keys() const
{
    std::vector<RunKey> out;
    for (double l : lambdas) {
        for (int h : hidden_sizes) {
            for (auto s : seeds) out.push_back({l, h, s});
        }
    }
    return out;
}

std::vector<RunRecord> run_sweep(const SweepData& data, const SweepGrid& grid, const wm::WmTrainConfig& base, int jobs,
                                 const std::function<void(const RunRecord&)>& on_done)
{
    if (!data.train || !data.test_expert || !data.test_random) throw std::invalid_argument("run_sweep: missing data");
    for (double l : grid.lambdas) {
        if (!(l >= 0.0)) throw std::invalid_argument("run_sweep: lambda must be >= 0");
    }
    const std::vector<RunKey> keys = grid.keys();
    std::vector<std::optional<RunRecord>> slots(keys.size());
    std::mutex mutex;
    parallel_for(keys.size(), jobs, [&](std::size_t i) {
        wm::WmTrainConfig cfg = base;
        cfg.lambda = keys[i].lambda;
        cfg.hidden = keys[i].hidden;
        cfg.seed = keys[i].seed;
        RunRecord rec{keys[i], wm::train_worldmodel(*data.train, *data.test_expert, *data.test_random, cfg)};
        std::lock_guard lock(mutex);
        if (on_done) on_done(rec);
        slots[i].emplace(std::move(rec));
    });
    std::vector<RunRecord> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

double median(std::vector<double> values)
{
    if (values.empty()) return kNaN;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sample_sd(const std::vector<double>& values)
{
    if (values.size() < 2) return kNaN;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

double mean_of(const std::vector<double>& v)
{
    if (v.empty()) return kNaN;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<LambdaSummary> summarize_lambda(const std::vector<RunRecord>& records)
{
    std::vector<std::pair<double, int>> order;
    std::map<std::pair<double, int>, std::vector<const RunRecord*>> groups;
    for (const auto& r : records) {
        const auto g = std::make_pair(r.key.lambda, r.key.hidden);
        if (!groups.contains(g)) order.push_back(g);
        groups[g].push_back(&r);
    }
    std::vector<LambdaSummary> out;
    for (const auto& g : order) {
        LambdaSummary s;
        s.lambda = g.first;
        s.hidden = g.second;
        std::vector<double> test, train;
        for (const auto* r : groups[g]) {
            ++s.runs;
            if (r->diverged()) {
                ++s.diverged;
                continue;
            }
            test.push_back(r->final_test_loss());
            train.push_back(r->final_train_loss());
        }
        s.mean_test = mean_of(test);
        s.sd_test = sample_sd(test);
        s.median_test = median(test);
        s.mean_train = mean_of(train);
        s.sd_train = sample_sd(train);
        s.median_train = median(train);
        out.push_back(s);
    }
    return out;
}

std::vector<ScalingRow> scaling_table(const std::vector<RunRecord>& records, int planned_epochs)
{
    std::vector<ScalingRow> out;
    const int mid = std::max(1, planned_epochs / 2);
    for (const auto& r : records) {
        ScalingRow row;
        row.key = r.key;
        row.diverged = r.diverged();
        row.mid_epoch = mid;
        row.mid_test_loss = kNaN;
        for (const auto& m : r.result.metrics) {
            if (m.epoch == mid && !m.diverged) row.mid_test_loss = m.test_pred_loss;
        }
        row.final_epoch = r.epochs_run();
        row.final_test_loss = r.final_test_loss();
        out.push_back(row);
    }
    return out;
}

std::vector<StabilityGroup> stability_report(const std::vector<RunRecord>& records, int planned_epochs)
{
    std::vector<std::pair<double, int>> order;
    std::map<std::pair<double, int>, StabilityGroup> groups;
    for (const auto& r : records) {
        const auto g = std::make_pair(r.key.lambda, r.key.hidden);
        if (!groups.contains(g)) {
            order.push_back(g);
            groups[g] = StabilityGroup{g.first, g.second, 0, 0, planned_epochs, {}};
        }
        StabilityGroup& s = groups[g];
        ++s.seeds;
        if (r.diverged()) {
            s.divergence_epochs.push_back(r.result.divergence_epoch);
        } else if (r.epochs_run() >= planned_epochs) {
            ++s.survived;
        }
    }
    std::vector<StabilityGroup> out;
    for (const auto& g : order) {
        StabilityGroup s = groups[g];
        std::sort(s.divergence_epochs.begin(), s.divergence_epochs.end());
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fbwm::eval

#include "fbwm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace fbwm::gradcheck {

namespace {

struct Coord {
    double* value;
    double analytic;
    std::string label;
};

FdReport check_coords(std::vector<Coord>& coords, const std::function<double()>& loss, const FdOptions& opt)
{
    std::vector<std::size_t> order(coords.size());
    std::iota(order.begin(), order.end(), 0);
    if (coords.size() > opt.min_coords) {
        std::mt19937_64 rng(opt.seed);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(opt.min_coords);
        std::sort(order.begin(), order.end());
    }
    FdReport report;
    for (std::size_t idx : order) {
        Coord& c = coords[idx];
        const double saved = *c.value;
        *c.value = saved + opt.h;
        const double plus = loss();
        *c.value = saved - opt.h;
        const double minus = loss();
        *c.value = saved;
        const double numeric = (plus - minus) / (2.0 * opt.h);
        const double abs_err = std::abs(numeric - c.analytic);
        const double rel_err = abs_err / std::max({std::abs(numeric), std::abs(c.analytic), opt.floor});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
            report.max_rel_error = std::isfinite(rel_err) ? rel_err : INFINITY;
            report.worst = c.label;
        }
        ++report.checked;
    }
    return report;
}

}  // namespace

FdReport finite_difference_check(std::span<double> x, std::span<const double> analytic,
                                 const std::function<double()>& loss, const FdOptions& options)
{
    if (x.size() != analytic.size()) throw std::invalid_argument("finite_difference_check: size mismatch");
    std::vector<Coord> coords;
    coords.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        coords.push_back({&x[i], analytic[i], "x[" + std::to_string(i) + "]"});
    }
    return check_coords(coords, loss, options);
}

FdReport finite_difference_check(tensor::ParamStore& store, const std::function<double()>& loss,
                                 const FdOptions& options)
{
    std::vector<Coord> coords;
    coords.reserve(store.num_scalars());
    for (auto& p : store) {
        for (tensor::Index i = 0; i < p.value.size(); ++i) {
            coords.push_back({p.value.data() + i, p.grad.data()[i], p.name + "[" + std::to_string(i) + "]"});
        }
    }
    return check_coords(coords, loss, options);
}

}  // namespace fbwm::gradcheck

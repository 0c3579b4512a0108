#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "fbwm/tensor.hpp"

namespace fbwm::gradcheck {

struct FdOptions {
    double h = 1e-5;
    std::size_t min_coords = 200;  // checked coordinates (all when fewer exist)
    std::uint64_t seed = 0;
    // Relative error is |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
};

struct FdReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "<param>[<index>]" of the largest relative error

    bool within(double tolerance) const { return max_rel_error < tolerance; }
};

// Central differences of `loss` over a random subsample of the coordinates
// of x, compared against `analytic`. x is restored afterwards.
FdReport finite_difference_check(std::span<double> x, std::span<const double> analytic,
                                 const std::function<double()>& loss, const FdOptions& options = {});

// Same, over every parameter in the store; the analytic gradient is read from
// the store's grad buffers, which the caller must have filled.
FdReport finite_difference_check(tensor::ParamStore& store, const std::function<double()>& loss,
                                 const FdOptions& options = {});

}  // namespace fbwm::gradcheck

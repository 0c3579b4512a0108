#pragma once

#include <optional>
#include <stdexcept>

#include "fbwm/tensor.hpp"

namespace fbwm::eval {

using tensor::Matrix;
using tensor::Vector;

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ridge regression with an unpenalized bias: solves
// (A^T A + reg * D) w = A^T y for A = [X, 1] and D = diag(1, ..., 1, 0).
// Rows of X are samples. Returns H + 1 weights, the bias last. Throws
// NumericalError when the system is singular (only possible with reg = 0).
Vector fit_ridge(const Matrix& x, const Vector& y, double reg);

// 1e-3 * trace(X^T X) / H.
double default_ridge(const Matrix& x);

struct ProbeFit {
    Vector weights;
    double mse = 0.0;
    double r2 = 0.0;          // 1 - MSE / var(y) on the evaluation rows
    bool degenerate = false;  // evaluation targets have zero variance; r2 is NaN
};

ProbeFit evaluate_probe(const Vector& weights, const Matrix& x, const Vector& y);

// Fits on (fit_x, fit_y) and reports held-out error on (eval_x, eval_y). Uses
// default_ridge(fit_x) when reg is not given.
ProbeFit fit_posthoc_probe(const Matrix& fit_x, const Vector& fit_y, const Matrix& eval_x, const Vector& eval_y,
                           std::optional<double> reg = std::nullopt);

}  // namespace fbwm::eval

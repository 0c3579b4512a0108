#include "fbwm/eval/probe.hpp"

#include <cmath>
#include <limits>

namespace fbwm::eval {

Vector fit_ridge(const Matrix& x, const Vector& y, double reg)
{
    if (x.rows() != y.size()) throw tensor::ShapeError("fit_ridge: row count mismatch");
    if (reg < 0.0) throw std::invalid_argument("fit_ridge: reg must be >= 0");
    const tensor::Index h = x.cols();
    Matrix a(x.rows(), h + 1);
    a.leftCols(h) = x;
    a.col(h).setOnes();
    Matrix gram = a.transpose() * a;
    gram.diagonal().head(h).array() += reg;
    const Vector rhs = a.transpose() * y;
    Eigen::FullPivLU<Matrix> lu(gram);
    if (!lu.isInvertible()) throw NumericalError("fit_ridge: singular normal equations");
    return lu.solve(rhs);
}

double default_ridge(const Matrix& x)
{
    if (x.cols() == 0) return 0.0;
    return 1e-3 * x.squaredNorm() / static_cast<double>(x.cols());
}

ProbeFit evaluate_probe(const Vector& weights, const Matrix& x, const Vector& y)
{
    const tensor::Index h = x.cols();
    if (weights.size() != h + 1) throw tensor::ShapeError("evaluate_probe: weight size mismatch");
    ProbeFit fit;
    fit.weights = weights;
    const Vector pred = (x * weights.head(h)).array() + weights[h];
    const double n = static_cast<double>(y.size());
    fit.mse = (pred - y).squaredNorm() / n;
    const double var = (y.array() - y.mean()).square().sum() / n;
    if (y.size() == 0 || y.maxCoeff() == y.minCoeff()) {
        fit.degenerate = true;
        fit.r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        fit.r2 = 1.0 - fit.mse / var;
    }
    return fit;
}

ProbeFit fit_posthoc_probe(const Matrix& fit_x, const Vector& fit_y, const Matrix& eval_x, const Vector& eval_y,
                           std::optional<double> reg)
{
    const Vector w = fit_ridge(fit_x, fit_y, reg.value_or(default_ridge(fit_x)));
    return evaluate_probe(w, eval_x, eval_y);
}

}  // namespace fbwm::eval

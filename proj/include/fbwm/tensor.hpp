#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fbwm::tensor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require_shape(const Matrix& m, Index rows, Index cols, const char* what)
{
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

struct ParamId {
    std::size_t index = 0;
};

// A trainable tensor together with its gradient accumulator and Adam moments.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
};

// Named parameters in insertion order. Layers refer to entries by ParamId so
// copies of a store stay self-consistent.
class ParamStore {
public:
    ParamId add(const std::string& name, Index rows, Index cols);

    Parameter& operator[](ParamId id) { return params_.at(id.index); }
    const Parameter& operator[](ParamId id) const { return params_.at(id.index); }
    Matrix& value(ParamId id) { return params_.at(id.index).value; }
    const Matrix& value(ParamId id) const { return params_.at(id.index).value; }
    Matrix& grad(ParamId id) { return params_.at(id.index).grad; }

    std::optional<ParamId> find(const std::string& name) const;

    std::size_t size() const { return params_.size(); }
    std::size_t num_scalars() const;
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    bool values_finite() const;

    // Fingerprint of names, shapes and values (not moments).
    std::uint64_t digest() const;

    long step = 0;  // optimizer steps taken

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace fbwm::tensor

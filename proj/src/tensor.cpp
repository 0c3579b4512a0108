#include "fbwm/tensor.hpp"

#include "fbwm/digest.hpp"

namespace fbwm::tensor {

ParamId ParamStore::add(const std::string& name, Index rows, Index cols)
{
    if (by_name_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Parameter p;
    p.name = name;
    p.value = Matrix::Zero(rows, cols);
    p.grad = Matrix::Zero(rows, cols);
    p.m = Matrix::Zero(rows, cols);
    p.v = Matrix::Zero(rows, cols);
    by_name_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return ParamId{params_.size() - 1};
}

std::optional<ParamId> ParamStore::find(const std::string& name) const
{
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return ParamId{it->second};
}

std::size_t ParamStore::num_scalars() const
{
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParamStore::zero_grad()
{
    for (auto& p : params_) p.grad.setZero();
}

bool ParamStore::values_finite() const
{
    for (const auto& p : params_) {
        if (!p.value.allFinite()) return false;
    }
    return true;
}

std::uint64_t ParamStore::digest() const
{
    Digest d;
    for (const auto& p : params_) {
        d.add(p.name).add<std::int64_t>(p.value.rows()).add<std::int64_t>(p.value.cols());
        d.bytes(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
    }
    return d.value();
}

}  // namespace fbwm::tensor

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fbwm/tensor.hpp"

namespace fbwm::nn {

using tensor::Index;
using tensor::Matrix;
using tensor::ParamId;
using tensor::ParamStore;
using tensor::Vector;

// y = W x + b, with inputs as columns.
struct Linear {
    ParamId weight;
    ParamId bias;
    Index in = 0;
    Index out = 0;

    static Linear create(ParamStore& store, const std::string& prefix, Index in, Index out);
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
void init_uniform(ParamStore& store, const Linear& layer, std::mt19937_64& rng);

// Affine layers with tanh between them and a linear final layer.
struct Mlp {
    std::vector<Linear> layers;

    static Mlp create(ParamStore& store, const std::string& prefix, const std::vector<Index>& dims);
    Index in() const { return layers.front().in; }
    Index out() const { return layers.back().out; }
};

void init_uniform(ParamStore& store, const Mlp& mlp, std::mt19937_64& rng);

struct MlpCache {
    std::vector<Matrix> activations;  // input, then each layer's output
};

Matrix mlp_forward(const ParamStore& store, const Mlp& mlp, const Matrix& x, MlpCache* cache = nullptr);

// Accumulates parameter gradients of a scalar loss given dL/dy and returns
// dL/dx.
Matrix mlp_backward(ParamStore& store, const Mlp& mlp, const MlpCache& cache, const Matrix& dy);

// Gate rows are stacked [input; forget; candidate; output].
struct Lstm {
    ParamId w_in;   // 4H x I
    ParamId w_rec;  // 4H x H
    ParamId bias;   // 4H x 1
    Index input = 0;
    Index hidden = 0;

    static Lstm create(ParamStore& store, const std::string& prefix, Index input, Index hidden);
};

void init_uniform(ParamStore& store, const Lstm& lstm, std::mt19937_64& rng);

struct LstmState {
    Vector h;
    Vector c;

    static LstmState zeros(Index hidden) { return {Vector::Zero(hidden), Vector::Zero(hidden)}; }
};

LstmState lstm_step(const ParamStore& store, const Lstm& lstm, const Vector& x, const LstmState& state);

struct LstmCache {
    Matrix x;      // I x T
    Matrix acts;   // 4H x T, post-nonlinearity gate values
    Matrix c;      // H x T
    Matrix tanh_c; // H x T
    Matrix h;      // H x T
    LstmState initial;
};

// Runs the cell over the columns of x and returns the hidden outputs (H x T).
Matrix lstm_forward(const ParamStore& store, const Lstm& lstm, const Matrix& x, const LstmState& initial,
                    LstmCache* cache = nullptr);

// Backpropagation through time given dL/dh_t for every step. Accumulates
// parameter gradients and returns dL/dx (I x T).
Matrix lstm_backward(ParamStore& store, const Lstm& lstm, const LstmCache& cache, const Matrix& dh);

inline double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace fbwm::nn

#include "fbwm/nn.hpp"

namespace fbwm::nn {

namespace {

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    }
}

}  // namespace

Linear Linear::create(ParamStore& store, const std::string& prefix, Index in, Index out)
{
    Linear l;
    l.weight = store.add(prefix + ".weight", out, in);
    l.bias = store.add(prefix + ".bias", out, 1);
    l.in = in;
    l.out = out;
    return l;
}

void init_uniform(ParamStore& store, const Linear& layer, std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    fill_uniform(store.value(layer.weight), bound, rng);
    fill_uniform(store.value(layer.bias), bound, rng);
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, const std::vector<Index>& dims)
{
    if (dims.size() < 2) throw tensor::ShapeError("mlp needs at least an input and an output size");
    Mlp mlp;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        mlp.layers.push_back(Linear::create(store, prefix + "." + std::to_string(l), dims[l], dims[l + 1]));
    }
    return mlp;
}

void init_uniform(ParamStore& store, const Mlp& mlp, std::mt19937_64& rng)
{
    for (const auto& l : mlp.layers) init_uniform(store, l, rng);
}

Matrix mlp_forward(const ParamStore& store, const Mlp& mlp, const Matrix& x, MlpCache* cache)
{
    if (x.rows() != mlp.in()) {
        throw tensor::ShapeError("mlp_forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                                 std::to_string(mlp.in()));
    }
    if (cache) {
        cache->activations.clear();
        cache->activations.push_back(x);
    }
    Matrix a = x;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        const Linear& layer = mlp.layers[l];
        Matrix z = store.value(layer.weight) * a;
        z.colwise() += store.value(layer.bias).col(0);
        if (l + 1 < mlp.layers.size()) z = z.array().tanh().matrix();
        a = std::move(z);
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

Matrix mlp_backward(ParamStore& store, const Mlp& mlp, const MlpCache& cache, const Matrix& dy)
{
    const std::size_t layers = mlp.layers.size();
    if (cache.activations.size() != layers + 1) throw tensor::ShapeError("mlp_backward: cache does not match model");
    tensor::require_shape(dy, mlp.out(), cache.activations.back().cols(), "mlp_backward dy");
    Matrix delta = dy;
    for (std::size_t l = layers; l-- > 0;) {
        const Linear& layer = mlp.layers[l];
        if (l + 1 < layers) {
            const Matrix& out = cache.activations[l + 1];
            delta.array() *= 1.0 - out.array().square();
        }
        const Matrix& in = cache.activations[l];
        store.grad(layer.weight).noalias() += delta * in.transpose();
        store.grad(layer.bias) += delta.rowwise().sum();
        delta = store.value(layer.weight).transpose() * delta;
    }
    return delta;
}

Lstm Lstm::create(ParamStore& store, const std::string& prefix, Index input, Index hidden)
{
    Lstm lstm;
    lstm.w_in = store.add(prefix + ".w_in", 4 * hidden, input);
    lstm.w_rec = store.add(prefix + ".w_rec", 4 * hidden, hidden);
    lstm.bias = store.add(prefix + ".bias", 4 * hidden, 1);
    lstm.input = input;
    lstm.hidden = hidden;
    return lstm;
}

void init_uniform(ParamStore& store, const Lstm& lstm, std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(lstm.hidden));
    fill_uniform(store.value(lstm.w_in), bound, rng);
    fill_uniform(store.value(lstm.w_rec), bound, rng);
    fill_uniform(store.value(lstm.bias), bound, rng);
}

namespace {

// Applies gate nonlinearities to pre-activations in place.
void activate_gates(Eigen::Ref<Vector> g, Index H)
{
    for (Index k = 0; k < 4 * H; ++k) {
        g[k] = (k >= 2 * H && k < 3 * H) ? std::tanh(g[k]) : sigmoid(g[k]);
    }
}

}  // namespace

LstmState lstm_step(const ParamStore& store, const Lstm& lstm, const Vector& x, const LstmState& state)
{
    const Index H = lstm.hidden;
    if (x.size() != lstm.input) throw tensor::ShapeError("lstm_step: input size mismatch");
    if (state.h.size() != H || state.c.size() != H) throw tensor::ShapeError("lstm_step: state size mismatch");
    Vector g = store.value(lstm.bias).col(0);
    g.noalias() += store.value(lstm.w_in) * x;
    g.noalias() += store.value(lstm.w_rec) * state.h;
    activate_gates(g, H);
    LstmState next;
    next.c = g.segment(H, H).cwiseProduct(state.c) + g.segment(0, H).cwiseProduct(g.segment(2 * H, H));
    next.h = g.segment(3 * H, H).cwiseProduct(next.c.array().tanh().matrix());
    return next;
}

Matrix lstm_forward(const ParamStore& store, const Lstm& lstm, const Matrix& x, const LstmState& initial,
                    LstmCache* cache)
{
    const Index H = lstm.hidden;
    const Index T = x.cols();
    if (x.rows() != lstm.input) throw tensor::ShapeError("lstm_forward: input size mismatch");
    if (initial.h.size() != H || initial.c.size() != H) throw tensor::ShapeError("lstm_forward: state size mismatch");

    Matrix acts = store.value(lstm.w_in) * x;
    acts.colwise() += store.value(lstm.bias).col(0);
    Matrix c(H, T), tanh_c(H, T), h(H, T);
    const Matrix& w_rec = store.value(lstm.w_rec);

    Vector h_prev = initial.h;
    Vector c_prev = initial.c;
    for (Index t = 0; t < T; ++t) {
        auto g = acts.col(t);
        g.noalias() += w_rec * h_prev;
        activate_gates(g, H);
        c.col(t) = g.segment(H, H).cwiseProduct(c_prev) + g.segment(0, H).cwiseProduct(g.segment(2 * H, H));
        tanh_c.col(t) = c.col(t).array().tanh();
        h.col(t) = g.segment(3 * H, H).cwiseProduct(tanh_c.col(t));
        h_prev = h.col(t);
        c_prev = c.col(t);
    }
    if (cache) {
        cache->x = x;
        cache->acts = std::move(acts);
        cache->c = std::move(c);
        cache->tanh_c = std::move(tanh_c);
        cache->h = h;
        cache->initial = initial;
    }
    return h;
}

Matrix lstm_backward(ParamStore& store, const Lstm& lstm, const LstmCache& cache, const Matrix& dh)
{
    const Index H = lstm.hidden;
    const Index T = cache.h.cols();
    tensor::require_shape(dh, H, T, "lstm_backward dh");
    if (T == 0) return Matrix::Zero(lstm.input, 0);
    const Matrix& w_rec = store.value(lstm.w_rec);

    Matrix dgates(4 * H, T);
    Vector dh_next = Vector::Zero(H);
    Vector dc_next = Vector::Zero(H);
    Vector dh_t(H), dc(H);
    for (Index t = T; t-- > 0;) {
        const auto a = cache.acts.col(t);
        const auto i = a.segment(0, H).array();
        const auto f = a.segment(H, H).array();
        const auto g = a.segment(2 * H, H).array();
        const auto o = a.segment(3 * H, H).array();
        const auto tc = cache.tanh_c.col(t).array();
        const Eigen::Map<const Vector> c_prev_v(t > 0 ? cache.c.col(t - 1).data() : cache.initial.c.data(), H);
        const auto c_prev = c_prev_v.array();

        dh_t = dh.col(t) + dh_next;
        dc = (dh_t.array() * o * (1.0 - tc.square())).matrix() + dc_next;
        auto dg = dgates.col(t);
        dg.segment(0, H) = (dc.array() * g * i * (1.0 - i)).matrix();
        dg.segment(H, H) = (dc.array() * c_prev * f * (1.0 - f)).matrix();
        dg.segment(2 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
        dg.segment(3 * H, H) = (dh_t.array() * tc * o * (1.0 - o)).matrix();
        dc_next = (dc.array() * f).matrix();
        dh_next.noalias() = w_rec.transpose() * dg;
    }

    store.grad(lstm.w_in).noalias() += dgates * cache.x.transpose();
    store.grad(lstm.bias) += dgates.rowwise().sum();
    Matrix& d_rec = store.grad(lstm.w_rec);
    d_rec.noalias() += dgates.col(0) * cache.initial.h.transpose();
    if (T > 1) d_rec.noalias() += dgates.rightCols(T - 1) * cache.h.leftCols(T - 1).transpose();
    return store.value(lstm.w_in).transpose() * dgates;
}

}  // namespace fbwm::nn

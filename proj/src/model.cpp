#include "sevscore/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sevscore/errors.hpp"

namespace sevscore {

ScoringModel::ScoringModel(std::vector<std::size_t> layer_dims, std::uint64_t seed,
                           Activation hidden_activation)
    : layer_dims_(std::move(layer_dims)), activation_(hidden_activation) {
    if (layer_dims_.size() < 2)
        throw ConfigError("ScoringModel needs at least an input and an output layer");
    for (std::size_t d : layer_dims_)
        if (d == 0) throw ConfigError("ScoringModel layer dims must be positive");
    if (layer_dims_.back() != 1)
        throw ConfigError("ScoringModel final layer dimension must be 1");

    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
        const std::size_t fan_in = layer_dims_[l];
        const std::size_t fan_out = layer_dims_[l + 1];
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = dist(rng);
        weights_.push_back(std::move(w));
        biases_.emplace_back(fan_out, 0.0);
    }
}

ScoringModel ScoringModel::from_parameters(std::vector<std::size_t> layer_dims,
                                           std::vector<Matrix> weights,
                                           std::vector<std::vector<double>> biases,
                                           Activation hidden_activation) {
    ScoringModel m;
    m.layer_dims_ = std::move(layer_dims);
    m.weights_ = std::move(weights);
    m.biases_ = std::move(biases);
    m.activation_ = hidden_activation;
    m.check_shapes();
    return m;
}

void ScoringModel::check_shapes() const {
    if (layer_dims_.size() < 2 || layer_dims_.back() != 1)
        throw ConfigError("ScoringModel layer_dims invalid");
    if (weights_.size() != layer_dims_.size() - 1 || biases_.size() != weights_.size())
        throw ConfigError("ScoringModel parameter count inconsistent with layer_dims");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (weights_[l].rows != layer_dims_[l + 1] || weights_[l].cols != layer_dims_[l] ||
            biases_[l].size() != layer_dims_[l + 1])
            throw ConfigError("ScoringModel layer " + std::to_string(l) + " has wrong shape");
    }
}

std::size_t ScoringModel::parameter_count() const {
    std::size_t n = 0;
    for (const Matrix& w : weights_) n += w.size();
    for (const auto& b : biases_) n += b.size();
    return n;
}

void GradientTape::zero() {
    for (Matrix& g : weight_grads) g.fill(0.0);
    for (auto& g : bias_grads) g.assign(g.size(), 0.0);
}

bool GradientTape::all_finite() const {
    for (const Matrix& g : weight_grads)
        for (double v : g.data)
            if (!std::isfinite(v)) return false;
    for (const auto& g : bias_grads)
        for (double v : g)
            if (!std::isfinite(v)) return false;
    return true;
}

GradientTape make_tape(const ScoringModel& model) {
    GradientTape tape;
    for (const Matrix& w : model.weights())
        tape.weight_grads.emplace_back(w.rows, w.cols);
    for (const auto& b : model.biases())
        tape.bias_grads.emplace_back(b.size(), 0.0);
    return tape;
}

namespace {

void check_input(const ScoringModel& model, std::span<const double> x) {
    if (x.size() != model.input_dim())
        throw DataError("forward: input has length " + std::to_string(x.size()) +
                        ", model expects " + std::to_string(model.input_dim()));
    for (double v : x)
        if (!std::isfinite(v)) throw DataError("forward: non-finite input entry");
}

}  // namespace

double forward_cached(const ScoringModel& model, std::span<const double> x,
                      ForwardCache& cache) {
    check_input(model, x);
    cache.activations.assign(1, std::vector<double>(x.begin(), x.end()));
    const std::size_t n_layers = model.num_layers();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Matrix& w = model.weights()[l];
        const auto& b = model.biases()[l];
        const auto& in = cache.activations.back();
        std::vector<double> out(w.rows);
        for (std::size_t r = 0; r < w.rows; ++r) {
            double acc = b[r];
            const double* wr = &w.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
            out[r] = acc;
        }
        const bool hidden = l + 1 < n_layers;
        if (hidden && model.hidden_activation() == Activation::Tanh)
            for (double& v : out) v = std::tanh(v);
        cache.activations.push_back(std::move(out));
    }
    return cache.activations.back()[0];
}

double forward(const ScoringModel& model, std::span<const double> x) {
    ForwardCache cache;
    return forward_cached(model, x, cache);
}

void backward_into(const ScoringModel& model, const ForwardCache& cache,
                   double upstream, GradientTape& tape) {
    const std::size_t n_layers = model.num_layers();
    if (cache.activations.size() != n_layers + 1)
        throw DataError("backward: cache does not match model depth");

    // delta holds d(upstream * f) / d(pre-activation of layer l).
    std::vector<double> delta{upstream};
    for (std::size_t li = n_layers; li-- > 0;) {
        const Matrix& w = model.weights()[li];
        const auto& in = cache.activations[li];
        Matrix& gw = tape.weight_grads[li];
        auto& gb = tape.bias_grads[li];
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            gb[r] += d;
            double* gr = &gw.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) gr[c] += d * in[c];
        }
        if (li == 0) break;
        std::vector<double> prev(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            const double* wr = &w.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) prev[c] += wr[c] * d;
        }
        if (model.hidden_activation() == Activation::Tanh) {
            // in == tanh(pre-activation), so tanh' = 1 - in^2.
            for (std::size_t c = 0; c < prev.size(); ++c) prev[c] *= 1.0 - in[c] * in[c];
        }
        delta = std::move(prev);
    }
}

GradientTape backward(const ScoringModel& model, std::span<const double> x,
                      double upstream) {
    ForwardCache cache;
    forward_cached(model, x, cache);
    GradientTape tape = make_tape(model);
    backward_into(model, cache, upstream, tape);
    return tape;
}

AdamState make_adam_state(const ScoringModel& model, double learning_rate,
                          double beta1, double beta2, double epsilon_num) {
    AdamState st;
    st.learning_rate = learning_rate;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon_num = epsilon_num;
    for (const Matrix& w : model.weights()) {
        st.m_weights.emplace_back(w.rows, w.cols);
        st.v_weights.emplace_back(w.rows, w.cols);
    }
    for (const auto& b : model.biases()) {
        st.m_biases.emplace_back(b.size(), 0.0);
        st.v_biases.emplace_back(b.size(), 0.0);
    }
    return st;
}

namespace {

void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamState& st, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
        m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
        v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= st.learning_rate * m_hat / (std::sqrt(v_hat) + st.epsilon_num);
    }
}

}  // namespace

void adam_step(ScoringModel& model, const GradientTape& tape, AdamState& state) {
    if (tape.weight_grads.size() != model.num_layers())
        throw DataError("adam_step: tape does not match model");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        Matrix& w = model.weights()[l];
        adam_update(w.data.data(), tape.weight_grads[l].data.data(),
                    state.m_weights[l].data.data(), state.v_weights[l].data.data(),
                    w.size(), state, bc1, bc2);
        auto& b = model.biases()[l];
        adam_update(b.data(), tape.bias_grads[l].data(), state.m_biases[l].data(),
                    state.v_biases[l].data(), b.size(), state, bc1, bc2);
    }
}

}  // namespace sevscore

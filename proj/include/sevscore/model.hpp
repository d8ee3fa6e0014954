#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sevscore/matrix.hpp"

namespace sevscore {

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

/// Feed-forward scoring network mapping a feature vector to one scalar.
/// Hidden layers use a bounded smooth nonlinearity, the output layer is
/// linear so scores stay unnormalized.
class ScoringModel {
public:
    ScoringModel() = default;

    /// Builds a network with the given layer sizes (input dim first, final
    /// dim must be 1). Weights are drawn uniformly from
    /// +-sqrt(6 / (fan_in + fan_out)), biases start at zero.
    ScoringModel(std::vector<std::size_t> layer_dims, std::uint64_t seed,
                 Activation hidden_activation = Activation::Tanh);

    std::size_t input_dim() const { return layer_dims_.front(); }
    std::size_t num_layers() const { return weights_.size(); }
    const std::vector<std::size_t>& layer_dims() const { return layer_dims_; }
    Activation hidden_activation() const { return activation_; }

    std::vector<Matrix>& weights() { return weights_; }
    const std::vector<Matrix>& weights() const { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    std::size_t parameter_count() const;

    /// Builds a model directly from existing parameters (checkpoint load,
    /// hand-constructed test fixtures).
    static ScoringModel from_parameters(std::vector<std::size_t> layer_dims,
                                        std::vector<Matrix> weights,
                                        std::vector<std::vector<double>> biases,
                                        Activation hidden_activation);

private:
    std::vector<std::size_t> layer_dims_;
    std::vector<Matrix> weights_;               // weights_[l] is (dims[l+1] x dims[l])
    std::vector<std::vector<double>> biases_;   // biases_[l] has dims[l+1] entries
    Activation activation_ = Activation::Tanh;

    void check_shapes() const;
};

/// Post-activation values of every layer for one input; activations[0] is
/// the input itself. Needed by backward().
struct ForwardCache {
    std::vector<std::vector<double>> activations;
};

/// Per-parameter gradient accumulators, shape-congruent with a model.
struct GradientTape {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;

    void zero();
    bool all_finite() const;
};

GradientTape make_tape(const ScoringModel& model);

/// Deterministic scalar forward pass. Rejects inputs of the wrong length
/// or with non-finite entries.
double forward(const ScoringModel& model, std::span<const double> x);

/// Forward pass that records layer activations for a later backward call.
double forward_cached(const ScoringModel& model, std::span<const double> x,
                      ForwardCache& cache);

/// Accumulates d(upstream * f(x)) / d(theta) into the tape.
void backward_into(const ScoringModel& model, const ForwardCache& cache,
                   double upstream, GradientTape& tape);

/// Convenience wrapper: fresh tape from a single forward/backward pair.
GradientTape backward(const ScoringModel& model, std::span<const double> x,
                      double upstream);

struct AdamState {
    std::uint64_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon_num = 1e-8;
    std::vector<Matrix> m_weights, v_weights;
    std::vector<std::vector<double>> m_biases, v_biases;
};

AdamState make_adam_state(const ScoringModel& model, double learning_rate = 1e-3,
                          double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon_num = 1e-8);

/// One bias-corrected Adam update. Throws NumericError on non-finite
/// gradients so the trainer can surface the batch index.
void adam_step(ScoringModel& model, const GradientTape& tape, AdamState& state);

}  // namespace sevscore

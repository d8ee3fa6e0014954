#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sevscore {

/// Integer rank within one ordering system. Values are normalized so that
/// larger means more severe; a missing value takes part in no pair.
struct OrdinalValue {
    std::int64_t value = 0;
    bool missing = true;

    static OrdinalValue present(std::int64_t v) { return {v, false}; }
    static OrdinalValue absent() { return {0, true}; }
};

struct ComparatorConfig {
    double epsilon = 1.0;  // margin beyond which a correctly ordered pair earns no loss
};

/// Loss of one pair plus its gradients with respect to the two scores,
/// reported against the original argument positions.
struct PairLoss {
    double loss = 0.0;
    double grad_a = 0.0;
    double grad_b = 0.0;
};

/// Hinge on the score difference of an ordered pair. Zero for equal orders;
/// otherwise, with the pair arranged so b has the higher order,
/// max(score_a - score_b + epsilon, 0). At the hinge kink the flat-side
/// subgradient (0) is used.
PairLoss comparator_pair_loss(double score_a, double score_b, OrdinalValue order_a,
                              OrdinalValue order_b, const ComparatorConfig& cfg);

struct BatchLossResult {
    double loss = 0.0;
    std::vector<double> score_grads;
    std::size_t comparable_pairs = 0;      // both labels present (and same group)
    std::size_t distinct_order_pairs = 0;  // comparable with unequal ordinals
    std::size_t hinge_active_pairs = 0;    // pairs contributing nonzero loss
    bool all_missing = false;              // warning flag: no label present

    double loss_per_active_pair() const {
        return distinct_order_pairs == 0 ? 0.0 : loss / double(distinct_order_pairs);
    }
};

/// Sum of comparator_pair_loss over all unordered pairs whose labels are
/// both present. An optional group id per sample restricts comparability
/// to within-group pairs (used by per-subject chronology sub-channels);
/// an empty span means one shared group.
BatchLossResult comparator_batch_loss(std::span<const double> scores,
                                      std::span<const OrdinalValue> labels,
                                      const ComparatorConfig& cfg,
                                      std::span<const std::int32_t> groups = {});

struct ChannelBatch {
    std::string name;
    double weight = 1.0;
    std::vector<OrdinalValue> labels;
    std::vector<std::int32_t> groups;  // empty = single group
};

struct MultiChannelLossResult {
    double loss = 0.0;
    std::vector<double> score_grads;
    std::vector<BatchLossResult> per_channel;  // aligned with the input channels
    std::size_t channels_included = 0;
    bool all_channels_missing = false;  // warning flag
};

/// Weighted mean of comparator_batch_loss over the channels; channels whose
/// labels are entirely missing in the batch are excluded from the mean.
MultiChannelLossResult multi_ordering_loss(std::span<const double> scores,
                                           const std::vector<ChannelBatch>& channels,
                                           const ComparatorConfig& cfg);

struct ScalarLoss {
    double loss = 0.0;
    double grad = 0.0;
};

/// Numerically stable binary cross-entropy on sigmoid(logit). The severity
/// score of a cross-entropy model is sigmoid(logit).
ScalarLoss cross_entropy_loss(double logit, bool positive_label);

double sigmoid(double x);

/// Classic contrastive loss in its scalar-distance form: same class pulls
/// scores together quadratically, different classes push them at least
/// `margin` apart.
PairLoss contrastive_pair_loss(double score_a, double score_b, bool same_class,
                               double margin);

/// Cumulative target vector: positions 0..class_index get 1, the rest 0.
std::vector<double> nrrank_targets(std::size_t class_index, std::size_t num_classes);

enum class NrrankMode { Mse, RelativeEntropy };

struct VectorLoss {
    double loss = 0.0;
    std::vector<double> grads;
};

/// Compares K predictions against the cumulative target vector, averaging
/// over positions. Mse treats predictions as raw regression outputs;
/// RelativeEntropy treats them as logits passed through a per-position
/// sigmoid.
VectorLoss nrrank_loss(std::span<const double> predictions, std::size_t class_index,
                       std::size_t num_classes, NrrankMode mode);

}  // namespace sevscore

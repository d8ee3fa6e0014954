#include "sevscore/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sevscore/errors.hpp"

namespace sevscore {

PairLoss comparator_pair_loss(double score_a, double score_b, OrdinalValue order_a,
                              OrdinalValue order_b, const ComparatorConfig& cfg) {
    if (order_a.missing || order_b.missing)
        throw DataError("comparator_pair_loss: missing ordinal; callers must filter pairs");
    if (cfg.epsilon <= 0.0)
        throw ConfigError("comparator_pair_loss: epsilon must be positive");

    PairLoss out;
    if (order_a.value == order_b.value) return out;

    // Arrange so "low"/"high" refer to the ordinal order, then report the
    // gradients back at the original positions.
    const bool a_is_low = order_a.value < order_b.value;
    const double score_low = a_is_low ? score_a : score_b;
    const double score_high = a_is_low ? score_b : score_a;
    const double hinge = score_low - score_high + cfg.epsilon;
    if (hinge > 0.0) {
        out.loss = hinge;
        out.grad_a = a_is_low ? 1.0 : -1.0;
        out.grad_b = a_is_low ? -1.0 : 1.0;
    }
    return out;
}

BatchLossResult comparator_batch_loss(std::span<const double> scores,
                                      std::span<const OrdinalValue> labels,
                                      const ComparatorConfig& cfg,
                                      std::span<const std::int32_t> groups) {
    const std::size_t n = scores.size();
    if (labels.size() != n)
        throw DataError("comparator_batch_loss: scores and labels differ in length");
    if (!groups.empty() && groups.size() != n)
        throw DataError("comparator_batch_loss: groups length mismatch");

    BatchLossResult out;
    out.score_grads.assign(n, 0.0);

    bool any_present = false;
    for (const OrdinalValue& l : labels) any_present |= !l.missing;
    if (!any_present) {
        out.all_missing = true;
        return out;
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (labels[i].missing) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (labels[j].missing) continue;
            if (!groups.empty() && groups[i] != groups[j]) continue;
            ++out.comparable_pairs;
            if (labels[i].value == labels[j].value) continue;
            ++out.distinct_order_pairs;
            const PairLoss pl =
                comparator_pair_loss(scores[i], scores[j], labels[i], labels[j], cfg);
            if (pl.loss > 0.0) {
                ++out.hinge_active_pairs;
                out.loss += pl.loss;
                out.score_grads[i] += pl.grad_a;
                out.score_grads[j] += pl.grad_b;
            }
        }
    }
    return out;
}

MultiChannelLossResult multi_ordering_loss(std::span<const double> scores,
                                           const std::vector<ChannelBatch>& channels,
                                           const ComparatorConfig& cfg) {
    if (channels.empty())
        throw ConfigError("multi_ordering_loss: at least one channel required");

    MultiChannelLossResult out;
    out.score_grads.assign(scores.size(), 0.0);

    double weight_total = 0.0;
    std::vector<std::size_t> included;
    for (const ChannelBatch& ch : channels) {
        if (ch.weight <= 0.0)
            throw ConfigError("multi_ordering_loss: channel weight must be positive");
        out.per_channel.push_back(
            comparator_batch_loss(scores, ch.labels, cfg, ch.groups));
        if (!out.per_channel.back().all_missing) {
            included.push_back(out.per_channel.size() - 1);
            weight_total += ch.weight;
        }
    }

    if (included.empty()) {
        out.all_channels_missing = true;
        return out;
    }
    out.channels_included = included.size();
    for (std::size_t idx : included) {
        const double w = channels[idx].weight / weight_total;
        out.loss += w * out.per_channel[idx].loss;
        const auto& g = out.per_channel[idx].score_grads;
        for (std::size_t i = 0; i < g.size(); ++i) out.score_grads[i] += w * g[i];
    }
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

ScalarLoss cross_entropy_loss(double logit, bool positive_label) {
    if (!std::isfinite(logit))
        throw DataError("cross_entropy_loss: non-finite logit");
    const double y = positive_label ? 1.0 : 0.0;
    // max(l, 0) - l*y + log(1 + exp(-|l|))
    ScalarLoss out;
    out.loss = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::fabs(logit)));
    out.grad = sigmoid(logit) - y;
    return out;
}

PairLoss contrastive_pair_loss(double score_a, double score_b, bool same_class,
                               double margin) {
    if (margin <= 0.0)
        throw ConfigError("contrastive_pair_loss: margin must be positive");
    PairLoss out;
    const double d = score_a - score_b;
    if (same_class) {
        out.loss = 0.5 * d * d;
        out.grad_a = d;
        out.grad_b = -d;
    } else {
        const double slack = margin - std::fabs(d);
        if (slack > 0.0) {
            out.loss = 0.5 * slack * slack;
            // d == 0 sits on the |.| kink; use the 0 subgradient there.
            const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            out.grad_a = -slack * sign;
            out.grad_b = slack * sign;
        }
    }
    return out;
}

std::vector<double> nrrank_targets(std::size_t class_index, std::size_t num_classes) {
    if (num_classes == 0 || class_index >= num_classes)
        throw ConfigError("nrrank_targets: class_index out of range");
    std::vector<double> t(num_classes, 0.0);
    for (std::size_t k = 0; k <= class_index; ++k) t[k] = 1.0;
    return t;
}

VectorLoss nrrank_loss(std::span<const double> predictions, std::size_t class_index,
                       std::size_t num_classes, NrrankMode mode) {
    if (predictions.size() != num_classes)
        throw DataError("nrrank_loss: prediction vector has wrong length");
    const std::vector<double> targets = nrrank_targets(class_index, num_classes);
    VectorLoss out;
    out.grads.assign(num_classes, 0.0);
    const double inv_k = 1.0 / double(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (mode == NrrankMode::Mse) {
            const double diff = predictions[k] - targets[k];
            out.loss += diff * diff * inv_k;
            out.grads[k] = 2.0 * diff * inv_k;
        } else {
            // Per-position Bernoulli relative entropy on sigmoid(logit).
            const ScalarLoss bce = cross_entropy_loss(predictions[k], targets[k] > 0.5);
            out.loss += bce.loss * inv_k;
            out.grads[k] = bce.grad * inv_k;
        }
    }
    return out;
}

}  // namespace sevscore

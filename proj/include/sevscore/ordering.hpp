#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sevscore/losses.hpp"

namespace sevscore {

enum class OrderingKind : std::uint8_t { Diagnosis, IntegerScale, Chronology };
enum class Direction : std::uint8_t { HigherIsMoreSevere, LowerIsMoreSevere };

/// A named ordinal label channel. `direction` states how the raw values
/// relate to severity; normalization flips lower_is_more_severe channels so
/// that after it, larger always means more severe.
struct OrderingSystem {
    std::string name;
    OrderingKind kind = OrderingKind::IntegerScale;
    Direction direction = Direction::HigherIsMoreSevere;
    double weight = 1.0;
    // Declared value range for integer_scale channels (raw, pre-normalization).
    std::optional<std::int64_t> min_value;
    std::optional<std::int64_t> max_value;
};

std::string to_string(OrderingKind kind);
std::string to_string(Direction dir);
OrderingKind ordering_kind_from_string(const std::string& s);
Direction direction_from_string(const std::string& s);

/// Normalized per-sample ordinals for one ordering system. Pairs are
/// comparable only within the same group; groups realize the per-subject
/// chronology sub-channels (a single shared group everywhere else).
struct LabelChannel {
    OrderingSystem ordering;
    std::vector<OrdinalValue> values;
    std::vector<std::int32_t> groups;  // empty = one shared group

    ChannelBatch gather(std::span<const std::size_t> batch_indices) const;
};

/// Applies the direction normalization exactly once: lower_is_more_severe
/// values are negated so larger always means more severe. Raw values must
/// be integral where present.
LabelChannel normalize_channel(const std::vector<std::optional<double>>& raw_values,
                               const OrderingSystem& ordering);

/// Chronology channel: within each eligible subject the ordinal is the
/// assessment time in whole days; samples of different subjects land in
/// different groups so cross-subject pairs contribute no loss. Ineligible
/// samples are missing.
LabelChannel chronology_channel(std::span<const std::int32_t> subject_of_sample,
                                std::span<const double> time_days,
                                const std::vector<bool>& eligible,
                                OrderingSystem ordering);

/// Exactly the unordered pairs comparator_batch_loss consumes for this
/// channel and batch: both labels present and same group. Pairs are local
/// indices into batch_indices.
std::vector<std::pair<std::size_t, std::size_t>> active_pairs(
    const LabelChannel& channel, std::span<const std::size_t> batch_indices);

}  // namespace sevscore

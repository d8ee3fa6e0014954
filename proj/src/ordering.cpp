#include "sevscore/ordering.hpp"

#include <cmath>

#include "sevscore/errors.hpp"

namespace sevscore {

std::string to_string(OrderingKind kind) {
    switch (kind) {
        case OrderingKind::Diagnosis: return "diagnosis";
        case OrderingKind::IntegerScale: return "integer_scale";
        case OrderingKind::Chronology: return "chronology";
    }
    return "?";
}

std::string to_string(Direction dir) {
    return dir == Direction::HigherIsMoreSevere ? "higher_is_more_severe"
                                                : "lower_is_more_severe";
}

OrderingKind ordering_kind_from_string(const std::string& s) {
    if (s == "diagnosis") return OrderingKind::Diagnosis;
    if (s == "integer_scale") return OrderingKind::IntegerScale;
    if (s == "chronology") return OrderingKind::Chronology;
    throw ConfigError("unknown ordering kind: " + s);
}

Direction direction_from_string(const std::string& s) {
    if (s == "higher_is_more_severe") return Direction::HigherIsMoreSevere;
    if (s == "lower_is_more_severe") return Direction::LowerIsMoreSevere;
    throw ConfigError("unknown ordering direction: " + s);
}

ChannelBatch LabelChannel::gather(std::span<const std::size_t> batch_indices) const {
    ChannelBatch batch;
    batch.name = ordering.name;
    batch.weight = ordering.weight;
    batch.labels.reserve(batch_indices.size());
    for (std::size_t idx : batch_indices) {
        if (idx >= values.size()) throw DataError("gather: sample index out of range");
        batch.labels.push_back(values[idx]);
    }
    if (!groups.empty()) {
        batch.groups.reserve(batch_indices.size());
        for (std::size_t idx : batch_indices) batch.groups.push_back(groups[idx]);
    }
    return batch;
}

LabelChannel normalize_channel(const std::vector<std::optional<double>>& raw_values,
                               const OrderingSystem& ordering) {
    LabelChannel ch;
    ch.ordering = ordering;
    ch.values.reserve(raw_values.size());
    const bool flip = ordering.direction == Direction::LowerIsMoreSevere;
    for (std::size_t i = 0; i < raw_values.size(); ++i) {
        if (!raw_values[i].has_value()) {
            ch.values.push_back(OrdinalValue::absent());
            continue;
        }
        const double v = *raw_values[i];
        if (!std::isfinite(v) || std::nearbyint(v) != v)
            throw DataError("normalize_channel(" + ordering.name + "): value at sample " +
                            std::to_string(i) + " is not an integer");
        const auto iv = static_cast<std::int64_t>(v);
        ch.values.push_back(OrdinalValue::present(flip ? -iv : iv));
    }
    return ch;
}

LabelChannel chronology_channel(std::span<const std::int32_t> subject_of_sample,
                                std::span<const double> time_days,
                                const std::vector<bool>& eligible,
                                OrderingSystem ordering) {
    const std::size_t n = subject_of_sample.size();
    if (time_days.size() != n || eligible.size() != n)
        throw DataError("chronology_channel: input spans differ in length");
    LabelChannel ch;
    ch.ordering = std::move(ordering);
    ch.ordering.kind = OrderingKind::Chronology;
    ch.values.reserve(n);
    ch.groups.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!eligible[i]) {
            ch.values.push_back(OrdinalValue::absent());
            continue;
        }
        // Assessments are per-day; same-day samples share an ordinal.
        ch.values.push_back(OrdinalValue::present(std::llround(time_days[i])));
        ch.groups[i] = subject_of_sample[i];
    }
    return ch;
}

std::vector<std::pair<std::size_t, std::size_t>> active_pairs(
    const LabelChannel& channel, std::span<const std::size_t> batch_indices) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t n = batch_indices.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t a = batch_indices[i];
        if (a >= channel.values.size()) throw DataError("active_pairs: index out of range");
        if (channel.values[a].missing) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t b = batch_indices[j];
            if (channel.values[b].missing) continue;
            if (!channel.groups.empty() && channel.groups[a] != channel.groups[b]) continue;
            pairs.emplace_back(i, j);
        }
    }
    return pairs;
}

}  // namespace sevscore

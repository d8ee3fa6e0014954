#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sevscore/model.hpp"

namespace sevscore {

/// How a model bank's raw outputs become the severity score at inference:
///   identity     - the single model's scalar (comparator, contrastive)
///   sigmoid      - sigmoid(logit) (cross-entropy)
///   sum          - sum of the bank's outputs (nrrank, mse mode)
///   sum_sigmoid  - sum of per-model sigmoids (nrrank, relative entropy)
enum class ScoreTransform : std::uint8_t {
    Identity = 0,
    Sigmoid = 1,
    Sum = 2,
    SumSigmoid = 3,
};

std::string to_string(ScoreTransform t);
ScoreTransform score_transform_from_string(const std::string& s);

/// Serialized training state: the model bank (one model for most losses,
/// K cumulative heads for nrrank), optional Adam state per model, and the
/// batch counter. The on-disk format is a versioned little-endian binary
/// container; parameter round-trips are bit-exact.
struct Checkpoint {
    std::vector<ScoringModel> models;
    std::vector<AdamState> adam;  // empty or one per model
    std::uint64_t train_batch = 0;
    ScoreTransform transform = ScoreTransform::Identity;

    bool has_adam() const { return !adam.empty(); }

    /// Severity score of one input under this checkpoint's transform.
    double score(std::span<const double> x) const;
};

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sevscore

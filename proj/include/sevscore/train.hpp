#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sevscore/checkpoint.hpp"
#include "sevscore/dataset.hpp"
#include "sevscore/losses.hpp"

namespace sevscore {

enum class LossKind : std::uint8_t { Comparator, CrossEntropy, Contrastive, Nrrank };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    std::string name = "run";
    LossKind loss = LossKind::Comparator;
    // Ordering channels supervising the loss. Names refer to orderings
    // declared in the dataset; "chronology" is synthesized from assessment
    // times of the subjects whose diagnosis is in chronology_restrict.
    std::vector<std::string> channels = {"diagnosis"};
    double epsilon = 1.0;             // comparator margin
    double contrastive_margin = 1.0;
    NrrankMode nrrank_mode = NrrankMode::Mse;
    std::size_t total_batches = 100000;
    std::size_t batch_size = 96;
    std::size_t eval_interval = 500;
    std::uint64_t seed = 1;
    std::vector<std::size_t> hidden_dims = {64};  // empty = pure linear scorer
    OptimizerConfig optimizer;
    std::string sampler = "uniform";  // or "subject_stratified"
    double subject_pair_fraction = 0.5;
    std::vector<std::string> chronology_restrict = {"MND"};

    void validate(const Dataset& dataset) const;
    static TrainConfig from_json_file(const std::filesystem::path& path);
    static TrainConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct EvalPoint {
    std::size_t batch = 0;
    double train_loss = 0.0;           // mean batch loss since the last point
    double train_loss_per_pair = 0.0;  // mean loss per order-distinct pair (comparator only)
    double val_accuracy = 0.0;
    bool improved = false;
    std::string checkpoint;  // path relative to the run dir, when saved
};

/// Append-only record of a run; enough to replay or resume it. Serialized
/// as manifest.json in the run directory (no wall-clock fields, so equal
/// runs produce byte-identical manifests).
struct RunManifest {
    std::string name;
    std::string dataset_path;
    std::string config_json;  // exact config snapshot
    std::vector<EvalPoint> history;
    std::size_t best_batch = 0;
    double best_val_accuracy = -1.0;
    std::string best_checkpoint;

    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

/// Trains under cfg, evaluating validation oracle-threshold accuracy every
/// eval_interval batches (threshold fitted on validation) and saving a
/// checkpoint only on strict improvement. With resume=true, continues an
/// interrupted run from its last saved checkpoint; the result is identical
/// to an uninterrupted run. Prints one progress line per evaluation when
/// verbose.
RunManifest run_training(const TrainConfig& cfg, const Dataset& dataset,
                         const std::string& dataset_path,
                         const std::filesystem::path& run_dir, bool resume = false,
                         bool verbose = false);

/// Severity scores for the given samples under a model bank + transform.
std::vector<double> score_samples(const std::vector<ScoringModel>& models,
                                  ScoreTransform transform, const Dataset& dataset,
                                  std::span<const std::size_t> sample_indices);

/// Builds the normalized label channels named by the config (including the
/// synthetic chronology channel) over all samples of the dataset.
std::vector<LabelChannel> build_channels(const TrainConfig& cfg, const Dataset& dataset);

}  // namespace sevscore

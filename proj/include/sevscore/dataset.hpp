#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sevscore/ordering.hpp"

namespace sevscore {

enum class Diagnosis : std::uint8_t { HC = 0, MND = 1 };
enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

std::string to_string(Diagnosis d);
std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One recording. Labels are raw (pre-normalization) integers keyed by
/// ordering name; a missing key means the label is absent for this sample.
/// latent_severity is generator ground truth, used for evaluation only.
struct Sample {
    std::string sample_id;
    std::string subject_id;
    double time_days = 0.0;
    std::vector<double> features;
    std::map<std::string, std::int64_t> raw_labels;
    std::optional<double> latent_severity;
    std::optional<Split> split;
};

/// All recordings of one subject on one day.
struct Assessment {
    double time_days = 0.0;
    std::vector<std::size_t> sample_indices;
};

struct Subject {
    std::string subject_id;
    Diagnosis diagnosis = Diagnosis::HC;
    std::vector<Assessment> assessments;  // strictly increasing times

    std::size_t assessment_count() const { return assessments.size(); }
};

struct Dataset {
    std::size_t feature_dim = 0;
    std::vector<OrderingSystem> orderings;  // label channels stored in the file
    std::vector<Sample> samples;

    // Derived on load/generation by rebuild_index().
    std::vector<Subject> subjects;                 // sorted by subject_id
    std::vector<std::int32_t> subject_of_sample;   // index into subjects

    void rebuild_index();

    const OrderingSystem* find_ordering(const std::string& name) const;
    const OrderingSystem& diagnosis_ordering() const;

    /// Raw label values of one channel across all samples (absent = nullopt).
    std::vector<std::optional<double>> raw_channel(const std::string& name) const;

    /// Sample indices assigned to a split.
    std::vector<std::size_t> split_indices(Split split) const;

    /// Per-sample diagnosis as 0 (HC) / 1 (MND).
    std::vector<int> diagnosis_labels() const;
};

// ---------------------------------------------------------------------------
// Synthetic longitudinal cohort
// ---------------------------------------------------------------------------

/// Latent model: HC severity is a small constant per subject; MND severity
/// grows linearly, s(t) = s0 + rate * t. Features observe the severity
/// through a fixed seeded map plus Gaussian noise; the integer subscore is
/// clip(round(4 - s + eta), 0, 4) on the 0-4 convention with lower = worse.
struct CohortConfig {
    std::size_t n_hc = 170;
    std::size_t n_mnd = 103;
    std::size_t assessments_min = 1;
    double assessments_mean = 4.0;  // count = min + Poisson(mean - min)
    std::size_t recordings_per_assessment = 3;
    std::size_t feature_dim = 24;
    double hc_severity_mean = 0.3;
    double hc_severity_sd = 0.15;
    double mnd_baseline_min = 0.8;
    double mnd_baseline_max = 2.2;
    double mnd_rate_mean = 0.006;  // expected progression per day (lognormal)
    double mnd_rate_log_sd = 0.3;
    double gap_days_min = 30.0;
    double gap_days_max = 120.0;
    double sigma_obs = 0.25;
    double sigma_lab = 0.3;
    std::string observation_map = "nonlinear";  // "nonlinear" | "linear"
    std::uint64_t observation_seed = 2024;
    bool subscore_for_controls = false;
    std::string subscore_name = "alsfrs_speech";
    std::uint64_t seed = 1;

    void validate() const;
    static CohortConfig from_json_file(const std::filesystem::path& path);
    static CohortConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

/// Deterministic under cfg.seed; fills latent_severity on every sample.
/// Splits are not assigned here.
Dataset generate_cohort(const CohortConfig& cfg);

// ---------------------------------------------------------------------------
// Longitudinal split
// ---------------------------------------------------------------------------

struct SplitAssignment {
    std::map<std::string, Split> by_subject;
};

/// Subjects sorted by assessment count descending (ties by subject_id
/// ascending); the top test_fraction go to test, a val_fraction share of
/// the remainder to validation, the rest to train. Splits are by subject.
SplitAssignment split_by_assessment_decile(const std::vector<Subject>& subjects,
                                           double test_fraction = 0.10,
                                           double val_fraction = 0.12);

void apply_split(Dataset& dataset, const SplitAssignment& assignment);

// ---------------------------------------------------------------------------
// Dataset file I/O (line-delimited JSON records, UTF-8)
// ---------------------------------------------------------------------------

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Batch sampling
// ---------------------------------------------------------------------------

class BatchSampler {
public:
    virtual ~BatchSampler() = default;
    /// Next batch of sample indices (into Dataset::samples). Deterministic
    /// under the construction seed.
    virtual std::vector<std::size_t> next_batch() = 0;

    /// Fast-forward past n batches (used when resuming a run).
    void skip(std::size_t n_batches) {
        for (std::size_t i = 0; i < n_batches; ++i) (void)next_batch();
    }
};

/// kind: "uniform" samples uniformly with replacement across the split;
/// "subject_stratified" fills roughly subject_pair_fraction of the batch
/// with within-subject sample pairs so chronology channels see pairs.
std::unique_ptr<BatchSampler> make_sampler(const std::string& kind,
                                           const Dataset& dataset, Split split,
                                           std::size_t batch_size, std::uint64_t seed,
                                           double subject_pair_fraction = 0.5);

}  // namespace sevscore

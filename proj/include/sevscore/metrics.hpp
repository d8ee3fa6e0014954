#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sevscore/dataset.hpp"

namespace sevscore {

struct ThresholdResult {
    double accuracy = 0.0;
    double threshold = 0.0;  // predict positive when score > threshold
    bool degenerate_ties = false;  // all scores equal
};

/// Best accuracy over the candidate cut points: -inf, midpoints between
/// consecutive distinct sorted scores, +inf. Accuracy ties break toward the
/// lower threshold. Requires both classes present.
ThresholdResult oracle_threshold_accuracy(std::span<const double> scores,
                                          std::span<const int> labels);

/// Mann-Whitney AUC; tied scores across classes contribute 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);

struct F1Result {
    double f1 = 0.0;
    bool no_positive_predictions = false;
};

/// F1 of the positive class with the rule: predict positive when
/// score > threshold.
F1Result f1_at_threshold(std::span<const double> scores, std::span<const int> labels,
                         double threshold);

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Spearman rank correlation with mid-rank tie handling; two-sided p-value
/// from the t approximation t = rho * sqrt((n-2)/(1-rho^2)). Throws
/// NumericError when either side has zero rank variance or n < 3.
SpearmanResult spearman(std::span<const double> a, std::span<const double> b);

/// Exact two-sided permutation p-value for the observed |rho|; n <= 10.
double spearman_exact_pvalue(std::span<const double> a, std::span<const double> b);

/// Mid-rank (average-rank) transform, 1-based.
std::vector<double> midranks(std::span<const double> values);

struct SubjectSlope {
    std::string subject_id;
    Diagnosis diagnosis = Diagnosis::HC;
    double slope = 0.0;  // score units per day
    std::size_t n_assessments = 0;
};

struct ProgressionResult {
    std::vector<SubjectSlope> slopes;
    std::vector<std::string> skipped;  // subjects with < 2 distinct assessment times
};

/// Ordinary least-squares slope of per-assessment mean scores against
/// time, one slope per subject with at least two distinct assessment
/// times. `sample_indices` selects the evaluated samples (one split);
/// `scores` is aligned with it.
ProgressionResult progression_slopes(const Dataset& dataset,
                                     std::span<const std::size_t> sample_indices,
                                     std::span<const double> scores);

struct GroupSummary {
    std::string group;
    std::size_t count = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    std::vector<std::size_t> histogram;
};

struct DistributionSummary {
    std::string title;
    double bin_lo = 0.0, bin_hi = 0.0;
    std::size_t n_bins = 0;
    std::vector<GroupSummary> groups;       // ordered by group key
    std::vector<std::string> empty_groups;  // flagged, not summarized
    std::optional<bool> dip_between_medians;  // set when exactly 2 groups
};

/// Per-group quantiles and a shared fixed-bin histogram. Group keys map
/// group label -> member scores; empty groups are flagged and omitted.
DistributionSummary score_distribution_summary(
    const std::map<std::string, std::vector<double>>& groups, const std::string& title,
    std::size_t n_bins = 20);

struct ChannelCorrelation {
    std::string channel;
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    bool significant = false;  // p < 0.05
    bool undefined = false;    // zero variance or too few labelled samples
};

/// Full metric bundle over one frozen score set.
struct EvalReport {
    std::string system;
    std::string split;
    std::size_t n_samples = 0;
    double accuracy = 0.0;
    double auc = 0.0;
    double f1 = 0.0;
    double oracle_threshold = 0.0;
    bool degenerate_ties = false;
    bool no_positive_predictions = false;
    std::vector<ChannelCorrelation> correlations;  // raw labels, plus latent ground truth
    ProgressionResult progression;
    double median_slope_mnd = 0.0;
    double median_slope_hc = 0.0;
    std::vector<DistributionSummary> distributions;
};

}  // namespace sevscore

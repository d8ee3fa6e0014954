#include "sevscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "sevscore/errors.hpp"

namespace sevscore {

namespace {

void check_binary_input(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw DataError("scores and labels differ in length");
    if (scores.empty()) throw DataError("empty score set");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("non-finite score");
    bool has_pos = false, has_neg = false;
    for (int l : labels) {
        if (l != 0 && l != 1) throw DataError("labels must be 0 or 1");
        (l ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw DataError("both classes must be present");
}

double accuracy_at(std::span<const double> scores, std::span<const int> labels,
                   double threshold) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if ((scores[i] > threshold ? 1 : 0) == labels[i]) ++correct;
    return double(correct) / double(scores.size());
}

}  // namespace

ThresholdResult oracle_threshold_accuracy(std::span<const double> scores,
                                          std::span<const int> labels) {
    check_binary_input(scores, labels);

    std::vector<double> distinct(scores.begin(), scores.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> candidates;
    candidates.push_back(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
        candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    candidates.push_back(std::numeric_limits<double>::infinity());

    ThresholdResult best;
    best.accuracy = -1.0;
    for (double t : candidates) {  // ascending: ties keep the lower threshold
        const double acc = accuracy_at(scores, labels, t);
        if (acc > best.accuracy) {
            best.accuracy = acc;
            best.threshold = t;
        }
    }
    best.degenerate_ties = distinct.size() == 1;
    return best;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_binary_input(scores, labels);
    const std::vector<double> ranks = midranks(scores);
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            rank_sum_pos += ranks[i];
            ++n_pos;
        }
    }
    const std::size_t n_neg = labels.size() - n_pos;
    return (rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0) /
           (double(n_pos) * double(n_neg));
}

F1Result f1_at_threshold(std::span<const double> scores, std::span<const int> labels,
                         double threshold) {
    check_binary_input(scores, labels);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        if (pred && labels[i] == 1) ++tp;
        if (pred && labels[i] == 0) ++fp;
        if (!pred && labels[i] == 1) ++fn;
    }
    F1Result out;
    if (tp + fp == 0) {
        out.no_positive_predictions = true;
        return out;
    }
    out.f1 = 2.0 * double(tp) / double(2 * tp + fp + fn);
    return out;
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = 0.5 * (double(i + 1) + double(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= double(n);
    mean_b /= double(n);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0)
        throw NumericError("correlation undefined: zero variance");
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace

SpearmanResult spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("spearman: length mismatch");
    const std::size_t n = a.size();
    if (n < 3) throw DataError("spearman: need at least 3 observations");

    const std::vector<double> ra = midranks(a);
    const std::vector<double> rb = midranks(b);
    double rho = pearson(ra, rb);
    rho = std::clamp(rho, -1.0, 1.0);

    SpearmanResult out;
    out.rho = rho;
    out.n = n;
    if (std::fabs(rho) >= 1.0) {
        out.p_value = 0.0;
        return out;
    }
    const double t = rho * std::sqrt(double(n - 2) / (1.0 - rho * rho));
    boost::math::students_t_distribution<double> dist(double(n - 2));
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return out;
}

double spearman_exact_pvalue(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    if (n != b.size()) throw DataError("spearman: length mismatch");
    if (n < 3 || n > 10)
        throw DataError("spearman_exact_pvalue: supported for 3 <= n <= 10");

    const std::vector<double> ra = midranks(a);
    std::vector<double> rb = midranks(b);
    const double observed = std::fabs(pearson(ra, rb));

    std::sort(rb.begin(), rb.end());
    std::size_t total = 0, at_least = 0;
    do {
        ++total;
        double rho;
        try {
            rho = pearson(ra, rb);
        } catch (const NumericError&) {
            rho = 0.0;  // all-tied permutation of b; cannot happen when observed exists
        }
        if (std::fabs(rho) >= observed - 1e-12) ++at_least;
    } while (std::next_permutation(rb.begin(), rb.end()));
    return double(at_least) / double(total);
}

ProgressionResult progression_slopes(const Dataset& dataset,
                                     std::span<const std::size_t> sample_indices,
                                     std::span<const double> scores) {
    if (sample_indices.size() != scores.size())
        throw DataError("progression_slopes: indices and scores differ in length");

    // subject -> time -> (sum, count) of scores in this split
    std::map<std::int32_t, std::map<double, std::pair<double, std::size_t>>> per_subject;
    for (std::size_t k = 0; k < sample_indices.size(); ++k) {
        const std::size_t idx = sample_indices[k];
        const Sample& s = dataset.samples[idx];
        auto& acc = per_subject[dataset.subject_of_sample[idx]][s.time_days];
        acc.first += scores[k];
        acc.second += 1;
    }

    ProgressionResult out;
    for (const auto& [subject_idx, by_time] : per_subject) {
        const Subject& subj = dataset.subjects[std::size_t(subject_idx)];
        if (by_time.size() < 2) {
            out.skipped.push_back(subj.subject_id);
            continue;
        }
        // OLS slope of per-assessment mean score against time.
        double mean_t = 0.0, mean_y = 0.0;
        for (const auto& [t, acc] : by_time) {
            mean_t += t;
            mean_y += acc.first / double(acc.second);
        }
        const double m = double(by_time.size());
        mean_t /= m;
        mean_y /= m;
        double num = 0.0, den = 0.0;
        for (const auto& [t, acc] : by_time) {
            const double y = acc.first / double(acc.second);
            num += (t - mean_t) * (y - mean_y);
            den += (t - mean_t) * (t - mean_t);
        }
        out.slopes.push_back(SubjectSlope{subj.subject_id, subj.diagnosis, num / den,
                                          by_time.size()});
    }
    return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted[0];
    const double pos = q * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

DistributionSummary score_distribution_summary(
    const std::map<std::string, std::vector<double>>& groups, const std::string& title,
    std::size_t n_bins) {
    if (n_bins == 0) throw ConfigError("score_distribution_summary: n_bins must be positive");
    DistributionSummary out;
    out.title = title;
    out.n_bins = n_bins;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [name, values] : groups) {
        if (values.empty()) {
            out.empty_groups.push_back(name);
            continue;
        }
        for (double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo)) return out;  // every group empty
    if (lo == hi) hi = lo + 1.0;         // all scores identical: one wide bin range
    out.bin_lo = lo;
    out.bin_hi = hi;

    for (const auto& [name, values] : groups) {
        if (values.empty()) continue;
        GroupSummary g;
        g.group = name;
        g.count = values.size();
        std::vector<double> sorted(values);
        std::sort(sorted.begin(), sorted.end());
        g.min = sorted.front();
        g.max = sorted.back();
        g.q1 = quantile_sorted(sorted, 0.25);
        g.median = quantile_sorted(sorted, 0.50);
        g.q3 = quantile_sorted(sorted, 0.75);
        g.histogram.assign(n_bins, 0);
        for (double v : sorted) {
            std::size_t bin = std::size_t((v - lo) / (hi - lo) * double(n_bins));
            if (bin >= n_bins) bin = n_bins - 1;
            ++g.histogram[bin];
        }
        out.groups.push_back(std::move(g));
    }

    // Dip indicator for two-group summaries: pooled histogram density at the
    // trough between the group medians vs at the medians themselves.
    if (out.groups.size() == 2) {
        std::vector<double> pooled(n_bins, 0.0);
        for (const GroupSummary& g : out.groups)
            for (std::size_t i = 0; i < n_bins; ++i) pooled[i] += double(g.histogram[i]);
        const auto bin_of = [&](double v) {
            std::size_t b = std::size_t((v - lo) / (hi - lo) * double(n_bins));
            return std::min(b, n_bins - 1);
        };
        std::size_t b1 = bin_of(out.groups[0].median);
        std::size_t b2 = bin_of(out.groups[1].median);
        if (b1 > b2) std::swap(b1, b2);
        if (b2 > b1 + 1) {
            double trough = std::numeric_limits<double>::infinity();
            for (std::size_t b = b1 + 1; b < b2; ++b) trough = std::min(trough, pooled[b]);
            out.dip_between_medians = trough < std::min(pooled[b1], pooled[b2]);
        } else {
            out.dip_between_medians = false;
        }
    }
    return out;
}

}  // namespace sevscore

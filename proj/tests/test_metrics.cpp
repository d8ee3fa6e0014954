#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sevscore/errors.hpp"
#include "sevscore/metrics.hpp"

using namespace sevscore;

namespace {

struct RandomCase {
    std::vector<double> scores;
    std::vector<int> labels;
};

RandomCase random_case(std::mt19937_64& rng, std::size_t n, bool with_ties) {
    RandomCase c;
    std::uniform_real_distribution<double> score(-2.0, 2.0);
    std::uniform_int_distribution<int> tied(-2, 2);
    std::uniform_int_distribution<int> label(0, 1);
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        c.scores.push_back(with_ties ? double(tied(rng)) : score(rng));
        c.labels.push_back(label(rng));
        (c.labels.back() ? pos : neg) = true;
    }
    if (!pos) c.labels[0] = 1;
    if (!neg) c.labels[n - 1 == 0 ? 1 : n - 1] = 0;
    return c;
}

}  // namespace

TEST_CASE("oracle threshold: separable case is perfect") {
    const std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> labels{0, 0, 1, 1};
    const ThresholdResult r = oracle_threshold_accuracy(scores, labels);
    CHECK(r.accuracy == 1.0);
    CHECK(r.threshold > 0.2);
    CHECK(r.threshold < 0.8);
    CHECK_FALSE(r.degenerate_ties);
}

TEST_CASE("oracle threshold: all-equal scores degenerate to the majority rate") {
    const std::vector<double> scores{1.0, 1.0, 1.0, 1.0};
    const std::vector<int> labels{0, 1, 0, 1};
    const ThresholdResult r = oracle_threshold_accuracy(scores, labels);
    CHECK(r.accuracy == 0.5);
    CHECK(r.degenerate_ties);
}

TEST_CASE("oracle threshold: single-class input rejected") {
    const std::vector<double> scores{0.1, 0.2};
    const std::vector<int> labels{1, 1};
    CHECK_THROWS_AS(oracle_threshold_accuracy(scores, labels), DataError);
}

TEST_CASE("oracle threshold: matches exhaustive search on random instances") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        const RandomCase c = random_case(rng, 12, t % 2 == 0);
        const ThresholdResult r = oracle_threshold_accuracy(c.scores, c.labels);
        CHECK(r.accuracy ==
              doctest::Approx(oracle::best_accuracy_reference(c.scores, c.labels))
                  .epsilon(1e-12));
    }
}

TEST_CASE("auc: perfect separation gives 1") {
    const std::vector<double> scores{-1.0, 0.0, 2.0, 3.0};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(auc(scores, labels) == 1.0);
}

TEST_CASE("auc: hand-checked tie straddling the classes") {
    // Negative at 0, positive at 1, and a tied pair at 0.5 on both sides.
    const std::vector<double> scores{0.0, 0.5, 0.5, 1.0};
    const std::vector<int> labels{0, 0, 1, 1};
    // pairs: (0.5+,0-)=1, (0.5+,0.5-)=0.5, (1+,0-)=1, (1+,0.5-)=1 -> 3.5/4
    CHECK(auc(scores, labels) == doctest::Approx(0.875).epsilon(1e-12));
}

TEST_CASE("auc: independent labels hover near one half") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, 1);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 4000; ++i) {
        scores.push_back(gauss(rng));
        labels.push_back(label(rng));
    }
    CHECK(std::fabs(auc(scores, labels) - 0.5) < 0.03);
}

TEST_CASE("auc: equals the cross-class pair ranking probability") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        const RandomCase c = random_case(rng, 50, t % 2 == 0);
        CHECK(auc(c.scores, c.labels) ==
              doctest::Approx(oracle::auc_reference(c.scores, c.labels)).epsilon(1e-12));
    }
}

TEST_CASE("f1: perfect classifier and degenerate all-negative predictions") {
    const std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(f1_at_threshold(scores, labels, 0.5).f1 == 1.0);

    const F1Result none = f1_at_threshold(scores, labels, 10.0);
    CHECK(none.f1 == 0.0);
    CHECK(none.no_positive_predictions);
}

TEST_CASE("f1: hand case with one false positive and one false negative") {
    const std::vector<double> scores{0.0, 0.3, 0.6, 0.7, 0.2, 0.9};
    const std::vector<int> labels{0, 0, 0, 1, 1, 1};
    // threshold 0.5: predictions 0,0,1,1,0,1 -> TP=2, FP=1, FN=1.
    CHECK(f1_at_threshold(scores, labels, 0.5).f1 ==
          doctest::Approx(2.0 * 2.0 / (2.0 * 2.0 + 1.0 + 1.0)).epsilon(1e-12));
}

TEST_CASE("f1: matches a direct confusion-count oracle") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> thr(-1.5, 1.5);
    for (int t = 0; t < 200; ++t) {
        const RandomCase c = random_case(rng, 30, t % 2 == 0);
        const double cut = thr(rng);
        CHECK(f1_at_threshold(c.scores, c.labels, cut).f1 ==
              doctest::Approx(oracle::f1_reference(c.scores, c.labels, cut)).epsilon(1e-12));
    }
}

TEST_CASE("spearman: monotone sequences") {
    const std::vector<double> inc{1.0, 2.0, 5.0, 9.0, 12.0};
    const std::vector<double> also_inc{0.1, 0.4, 0.5, 2.0, 30.0};
    const SpearmanResult up = spearman(inc, also_inc);
    CHECK(up.rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(up.p_value < 0.05);

    std::vector<double> dec(also_inc.rbegin(), also_inc.rend());
    CHECK(spearman(inc, dec).rho == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spearman: self correlation is 1 and bounds hold") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const std::vector<double> v = oracle::random_vector(rng, 20);
        const SpearmanResult self = spearman(v, v);
        CHECK(self.rho == doctest::Approx(1.0).epsilon(1e-12));
        const std::vector<double> w = oracle::random_vector(rng, 20);
        const SpearmanResult r = spearman(v, w);
        CHECK(r.rho >= -1.0);
        CHECK(r.rho <= 1.0);
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
    }
}

TEST_CASE("spearman: matches the rank-then-Pearson oracle with heavy ties") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> tied(0, 4);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> a = oracle::random_vector(rng, 15);
        std::vector<double> b(15);
        for (double& v : b) v = double(tied(rng));
        if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; })) continue;
        CHECK(spearman(a, b).rho ==
              doctest::Approx(oracle::spearman_reference(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("spearman: p-value matches scipy on a fixed instance") {
    // scipy.stats.spearmanr reference: rho=-0.16363636..., p=0.65147734...
    const std::vector<double> a{17, 86, 60, 77, 47, 3, 70, 87, 88, 92};
    const std::vector<double> b{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
    const SpearmanResult r = spearman(a, b);
    CHECK(r.rho == doctest::Approx(-0.16363636363636364).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(0.6514773427962428).epsilon(1e-9));
}

TEST_CASE("spearman: zero variance and tiny n are rejected") {
    const std::vector<double> flat{1.0, 1.0, 1.0, 1.0};
    const std::vector<double> vary{1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(spearman(flat, vary), NumericError);
    CHECK_THROWS_AS(spearman(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}),
                    DataError);
}

TEST_CASE("spearman: exact permutation p-value tracks the t approximation") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        const std::vector<double> a = oracle::random_vector(rng, 8);
        const std::vector<double> b = oracle::random_vector(rng, 8);
        const SpearmanResult approx = spearman(a, b);
        const double exact = spearman_exact_pvalue(a, b);
        CHECK(std::fabs(approx.p_value - exact) < 0.12);
    }
}

TEST_CASE("progression: two-point slope and constant scores") {
    Dataset ds;
    ds.feature_dim = 1;
    OrderingSystem diag;
    diag.name = "diagnosis";
    diag.kind = OrderingKind::Diagnosis;
    ds.orderings.push_back(diag);
    auto add = [&](const std::string& sid, const std::string& subj, double day, int d) {
        Sample s;
        s.sample_id = sid;
        s.subject_id = subj;
        s.time_days = day;
        s.features = {0.0};
        s.raw_labels["diagnosis"] = d;
        ds.samples.push_back(std::move(s));
    };
    add("a0", "P1", 0.0, 1);
    add("a1", "P1", 100.0, 1);
    add("b0", "P2", 0.0, 0);
    add("b1", "P2", 50.0, 0);
    add("c0", "P3", 10.0, 1);  // single assessment: skipped
    ds.rebuild_index();

    const std::vector<std::size_t> idx{0, 1, 2, 3, 4};
    const std::vector<double> scores{0.1, 0.3, 0.7, 0.7, 0.2};
    const ProgressionResult r = progression_slopes(ds, idx, scores);
    REQUIRE(r.slopes.size() == 2);
    REQUIRE(r.skipped.size() == 1);
    CHECK(r.skipped[0] == "P3");
    for (const SubjectSlope& s : r.slopes) {
        if (s.subject_id == "P1") CHECK(s.slope == doctest::Approx(0.002).epsilon(1e-12));
        if (s.subject_id == "P2") CHECK(s.slope == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("progression: per-assessment means weigh repeated recordings once") {
    Dataset ds;
    ds.feature_dim = 1;
    OrderingSystem diag;
    diag.name = "diagnosis";
    diag.kind = OrderingKind::Diagnosis;
    ds.orderings.push_back(diag);
    for (int r = 0; r < 3; ++r) {
        Sample s;
        s.sample_id = "d0_r" + std::to_string(r);
        s.subject_id = "P";
        s.time_days = 0.0;
        s.features = {0.0};
        s.raw_labels["diagnosis"] = 1;
        ds.samples.push_back(std::move(s));
    }
    Sample last;
    last.sample_id = "d1";
    last.subject_id = "P";
    last.time_days = 10.0;
    last.features = {0.0};
    last.raw_labels["diagnosis"] = 1;
    ds.samples.push_back(std::move(last));
    ds.rebuild_index();

    const std::vector<std::size_t> idx{0, 1, 2, 3};
    const std::vector<double> scores{0.0, 0.3, 0.6, 1.3};  // day-0 mean 0.3
    const ProgressionResult r = progression_slopes(ds, idx, scores);
    REQUIRE(r.slopes.size() == 1);
    CHECK(r.slopes[0].slope == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("metric invariances under increasing affine score transforms") {
    std::mt19937_64 rng(8);
    const RandomCase c = random_case(rng, 40, false);
    std::vector<double> ordinals(40);
    std::uniform_int_distribution<int> level(0, 4);
    for (double& v : ordinals) v = double(level(rng));

    const ThresholdResult acc0 = oracle_threshold_accuracy(c.scores, c.labels);
    const double auc0 = auc(c.scores, c.labels);
    const double rho0 = spearman(c.scores, ordinals).rho;

    for (const auto& [mul, add] : std::vector<std::pair<double, double>>{
             {2.5, -1.0}, {0.3, 7.0}, {10.0, 0.0}}) {
        std::vector<double> t(c.scores);
        for (double& v : t) v = mul * v + add;
        CHECK(oracle_threshold_accuracy(t, c.labels).accuracy ==
              doctest::Approx(acc0.accuracy).epsilon(1e-12));
        CHECK(auc(t, c.labels) == doctest::Approx(auc0).epsilon(1e-12));
        CHECK(spearman(t, ordinals).rho == doctest::Approx(rho0).epsilon(1e-12));
    }
}

TEST_CASE("distribution summary: quantiles, flags, histograms") {
    std::map<std::string, std::vector<double>> groups;
    groups["only"] = {1.0, 2.0, 3.0, 4.0, 5.0};
    groups["empty"] = {};
    const DistributionSummary d = score_distribution_summary(groups, "t", 10);
    REQUIRE(d.groups.size() == 1);
    CHECK(d.groups[0].median == doctest::Approx(3.0));
    CHECK(d.groups[0].q1 == doctest::Approx(2.0));
    CHECK(d.groups[0].q3 == doctest::Approx(4.0));
    CHECK(d.groups[0].min == 1.0);
    CHECK(d.groups[0].max == 5.0);
    REQUIRE(d.empty_groups.size() == 1);
    CHECK(d.empty_groups[0] == "empty");
    std::size_t total = 0;
    for (std::size_t c : d.groups[0].histogram) total += c;
    CHECK(total == 5);
}

TEST_CASE("distribution summary: dip shows up between well-separated classes") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> lo(0.0, 0.3), hi(4.0, 0.3);
    std::map<std::string, std::vector<double>> groups;
    for (int i = 0; i < 300; ++i) {
        groups["HC"].push_back(lo(rng));
        groups["MND"].push_back(hi(rng));
    }
    const DistributionSummary d = score_distribution_summary(groups, "t", 20);
    REQUIRE(d.dip_between_medians.has_value());
    CHECK(*d.dip_between_medians);

    // Overlapping classes: no dip.
    std::map<std::string, std::vector<double>> mixed;
    std::normal_distribution<double> mid(2.0, 0.4);
    for (int i = 0; i < 300; ++i) {
        mixed["HC"].push_back(mid(rng));
        mixed["MND"].push_back(mid(rng));
    }
    const DistributionSummary m = score_distribution_summary(mixed, "t", 20);
    REQUIRE(m.dip_between_medians.has_value());
    CHECK_FALSE(*m.dip_between_medians);
}

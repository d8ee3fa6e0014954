#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sevscore/dataset.hpp"
#include "sevscore/errors.hpp"
#include "sevscore/ordering.hpp"

using namespace sevscore;

namespace {

OrderingSystem scale(const std::string& name, Direction dir) {
    OrderingSystem o;
    o.name = name;
    o.kind = OrderingKind::IntegerScale;
    o.direction = dir;
    return o;
}

}  // namespace

TEST_CASE("normalize: higher-is-more-severe passes through") {
    const std::vector<std::optional<double>> raw{0.0, 1.0, std::nullopt, 1.0};
    const LabelChannel ch = normalize_channel(raw, scale("diag", Direction::HigherIsMoreSevere));
    CHECK(ch.values[0].value == 0);
    CHECK(ch.values[1].value == 1);
    CHECK(ch.values[2].missing);
    CHECK_FALSE(ch.values[3].missing);
}

TEST_CASE("normalize: lower-is-more-severe flips the sign") {
    // A 4 (normal function) must rank below a 0 (worst).
    const std::vector<std::optional<double>> raw{4.0, 0.0};
    const LabelChannel ch = normalize_channel(raw, scale("sub", Direction::LowerIsMoreSevere));
    CHECK(ch.values[0].value == -4);
    CHECK(ch.values[1].value == 0);
    CHECK(ch.values[1].value > ch.values[0].value);
}

TEST_CASE("normalize: idempotent on an already-normalized channel") {
    const std::vector<std::optional<double>> raw{-3.0, 0.0, 5.0};
    const LabelChannel ch = normalize_channel(raw, scale("x", Direction::HigherIsMoreSevere));
    std::vector<std::optional<double>> again;
    for (const OrdinalValue& v : ch.values) again.push_back(double(v.value));
    const LabelChannel ch2 = normalize_channel(again, scale("x", Direction::HigherIsMoreSevere));
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(ch.values[i].value == ch2.values[i].value);
}

TEST_CASE("normalize: order preservation under either direction") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> value(-5, 5);
    for (Direction dir : {Direction::HigherIsMoreSevere, Direction::LowerIsMoreSevere}) {
        std::vector<std::optional<double>> raw;
        for (int i = 0; i < 30; ++i) raw.push_back(double(value(rng)));
        const LabelChannel ch = normalize_channel(raw, scale("x", dir));
        for (std::size_t i = 0; i < raw.size(); ++i) {
            for (std::size_t j = 0; j < raw.size(); ++j) {
                // More severe raw value (per direction) must get a larger ordinal.
                const bool i_worse = dir == Direction::HigherIsMoreSevere ? *raw[i] > *raw[j]
                                                                          : *raw[i] < *raw[j];
                if (i_worse) CHECK(ch.values[i].value > ch.values[j].value);
            }
        }
    }
}

TEST_CASE("normalize: rejects non-integral raw values") {
    const std::vector<std::optional<double>> raw{1.5};
    CHECK_THROWS_AS(normalize_channel(raw, scale("x", Direction::HigherIsMoreSevere)),
                    DataError);
}

TEST_CASE("chronology: assessment days become ordinals within a subject") {
    const std::vector<std::int32_t> subject{0, 0, 0};
    const std::vector<double> days{0.0, 90.0, 200.0};
    const std::vector<bool> eligible{true, true, true};
    const LabelChannel ch = chronology_channel(subject, days, eligible, OrderingSystem{});
    CHECK(ch.values[0].value == 0);
    CHECK(ch.values[1].value == 90);
    CHECK(ch.values[2].value == 200);
}

TEST_CASE("chronology: single-assessment subject contributes no pairs") {
    const std::vector<std::int32_t> subject{0};
    const std::vector<double> days{42.0};
    const LabelChannel ch = chronology_channel(subject, days, {true}, OrderingSystem{});
    const std::vector<std::size_t> batch{0};
    CHECK(active_pairs(ch, batch).empty());
}

TEST_CASE("chronology: cross-subject pairs are incomparable") {
    // Two subjects, two assessments each: exactly the two within-subject
    // pairs are loss-active.
    const std::vector<std::int32_t> subject{0, 0, 1, 1};
    const std::vector<double> days{0.0, 60.0, 10.0, 100.0};
    const std::vector<bool> eligible{true, true, true, true};
    const LabelChannel ch = chronology_channel(subject, days, eligible, OrderingSystem{});
    const std::vector<std::size_t> batch{0, 1, 2, 3};
    const auto pairs = active_pairs(ch, batch);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(pairs[1] == std::pair<std::size_t, std::size_t>{2, 3});
}

TEST_CASE("chronology: ineligible subjects are excluded") {
    const std::vector<std::int32_t> subject{0, 0, 1, 1};
    const std::vector<double> days{0.0, 60.0, 10.0, 100.0};
    const std::vector<bool> eligible{true, true, false, false};  // subject 1 restricted out
    const LabelChannel ch = chronology_channel(subject, days, eligible, OrderingSystem{});
    CHECK(ch.values[2].missing);
    CHECK(ch.values[3].missing);
    const std::vector<std::size_t> batch{0, 1, 2, 3};
    CHECK(active_pairs(ch, batch).size() == 1);
}

TEST_CASE("active_pairs: counting rules") {
    OrderingSystem o = scale("x", Direction::HigherIsMoreSevere);

    LabelChannel all_missing;
    all_missing.ordering = o;
    all_missing.values.assign(4, OrdinalValue::absent());
    const std::vector<std::size_t> batch4{0, 1, 2, 3};
    CHECK(active_pairs(all_missing, batch4).empty());

    LabelChannel all_present;
    all_present.ordering = o;
    for (int i = 0; i < 4; ++i) all_present.values.push_back(OrdinalValue::present(i));
    CHECK(active_pairs(all_present, batch4).size() == 6);

    LabelChannel two_present;
    two_present.ordering = o;
    two_present.values = {OrdinalValue::present(1), OrdinalValue::absent(),
                          OrdinalValue::present(0), OrdinalValue::absent(),
                          OrdinalValue::absent()};
    const std::vector<std::size_t> batch5{0, 1, 2, 3, 4};
    CHECK(active_pairs(two_present, batch5).size() == 1);
}

TEST_CASE("active_pairs: exactly the pairs the batch loss consumes") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> value(0, 3);
    std::uniform_int_distribution<std::int32_t> group(0, 2);
    for (int trial = 0; trial < 50; ++trial) {
        LabelChannel ch;
        ch.ordering = scale("x", Direction::HigherIsMoreSevere);
        const std::size_t n = 10;
        for (std::size_t i = 0; i < n; ++i) {
            ch.values.push_back(coin(rng) < 0.3 ? OrdinalValue::absent()
                                                : OrdinalValue::present(value(rng)));
            ch.groups.push_back(group(rng));
        }
        std::vector<std::size_t> batch(n);
        for (std::size_t i = 0; i < n; ++i) batch[i] = i;

        const auto pairs = active_pairs(ch, batch);
        const ChannelBatch gathered = ch.gather(batch);
        const std::vector<double> scores = oracle::random_vector(rng, n);
        const BatchLossResult res = comparator_batch_loss(
            scores, gathered.labels, ComparatorConfig{1.0}, gathered.groups);
        CHECK(pairs.size() == res.comparable_pairs);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "sevscore/dataset.hpp"
#include "sevscore/errors.hpp"

using namespace sevscore;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "sevscore_test";
    fs::create_directories(dir);
    return dir / name;
}

CohortConfig small_cohort() {
    CohortConfig cfg;
    cfg.n_hc = 12;
    cfg.n_mnd = 10;
    cfg.assessments_min = 2;
    cfg.assessments_mean = 3.0;
    cfg.recordings_per_assessment = 2;
    cfg.feature_dim = 6;
    cfg.seed = 42;
    return cfg;
}

std::vector<Subject> fake_subjects(const std::vector<std::size_t>& counts) {
    std::vector<Subject> subjects;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        Subject s;
        s.subject_id = "S" + std::to_string(100 + i);
        for (std::size_t a = 0; a < counts[i]; ++a)
            s.assessments.push_back(Assessment{double(a * 30), {}});
        subjects.push_back(std::move(s));
    }
    return subjects;
}

}  // namespace

TEST_CASE("generator: noiseless MND subscores are non-increasing over time") {
    CohortConfig cfg = small_cohort();
    cfg.n_hc = 1;
    cfg.n_mnd = 1;
    cfg.sigma_obs = 0.0;
    cfg.sigma_lab = 0.0;
    cfg.assessments_min = 5;
    cfg.assessments_mean = 5.0;
    const Dataset ds = generate_cohort(cfg);
    std::map<double, std::int64_t> by_time;
    for (const Sample& s : ds.samples)
        if (s.subject_id.starts_with("MND"))
            by_time[s.time_days] = s.raw_labels.at(cfg.subscore_name);
    REQUIRE(by_time.size() == 5);
    std::int64_t prev = 4;
    for (const auto& [t, v] : by_time) {
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("generator: zero observation noise means equal latent gives equal features") {
    CohortConfig cfg = small_cohort();
    cfg.sigma_obs = 0.0;
    cfg.recordings_per_assessment = 3;
    const Dataset ds = generate_cohort(cfg);
    std::map<std::string, std::vector<const Sample*>> by_subject_time;
    for (const Sample& s : ds.samples)
        by_subject_time[s.subject_id + "@" + std::to_string(s.time_days)].push_back(&s);
    for (const auto& [key, group] : by_subject_time) {
        for (std::size_t i = 1; i < group.size(); ++i) {
            CHECK(*group[i]->latent_severity == *group[0]->latent_severity);
            CHECK(group[i]->features == group[0]->features);
        }
    }
}

TEST_CASE("generator: noiseless MND latent severity strictly increases in time") {
    CohortConfig cfg = small_cohort();
    cfg.sigma_obs = 0.0;
    cfg.sigma_lab = 0.0;
    cfg.assessments_min = 4;
    cfg.assessments_mean = 4.0;
    const Dataset ds = generate_cohort(cfg);
    for (const Subject& subj : ds.subjects) {
        if (subj.diagnosis != Diagnosis::MND) continue;
        double prev = -1.0;
        for (const Assessment& a : subj.assessments) {
            const double latent = *ds.samples[a.sample_indices[0]].latent_severity;
            CHECK(latent > prev);
            prev = latent;
        }
    }
}

TEST_CASE("generator: empirical mean MND slope matches the configured rate") {
    CohortConfig cfg = small_cohort();
    cfg.n_hc = 1;
    cfg.n_mnd = 150;
    cfg.seed = 1;
    const Dataset ds = generate_cohort(cfg);
    // Per-subject latent slope from first to last assessment.
    double total = 0.0;
    std::size_t count = 0;
    for (const Subject& subj : ds.subjects) {
        if (subj.diagnosis != Diagnosis::MND || subj.assessments.size() < 2) continue;
        const Assessment& first = subj.assessments.front();
        const Assessment& last = subj.assessments.back();
        const double ds_dt =
            (*ds.samples[last.sample_indices[0]].latent_severity -
             *ds.samples[first.sample_indices[0]].latent_severity) /
            (last.time_days - first.time_days);
        total += ds_dt;
        ++count;
    }
    REQUIRE(count >= 100);
    const double mean_rate = total / double(count);
    CHECK(std::fabs(mean_rate - cfg.mnd_rate_mean) / cfg.mnd_rate_mean < 0.05);
}

TEST_CASE("generator: deterministic under the master seed") {
    const CohortConfig cfg = small_cohort();
    const Dataset a = generate_cohort(cfg);
    const Dataset b = generate_cohort(cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].sample_id == b.samples[i].sample_id);
        CHECK(a.samples[i].features == b.samples[i].features);
        CHECK(a.samples[i].raw_labels == b.samples[i].raw_labels);
    }
}

TEST_CASE("generator: subscores only on MND subjects by default") {
    const Dataset ds = generate_cohort(small_cohort());
    for (const Sample& s : ds.samples) {
        const bool has_sub = s.raw_labels.count("alsfrs_speech") > 0;
        CHECK(has_sub == s.subject_id.starts_with("MND"));
    }
}

TEST_CASE("split: top decile by assessment count goes to test") {
    const std::vector<Subject> subjects = fake_subjects({9, 8, 7, 6, 5, 4, 3, 2, 1, 0});
    const SplitAssignment split = split_by_assessment_decile(subjects);
    CHECK(split.by_subject.at("S100") == Split::Test);  // the count-9 subject
    std::size_t n_test = 0, n_val = 0, n_train = 0;
    for (const auto& [id, sp] : split.by_subject) {
        if (sp == Split::Test) ++n_test;
        if (sp == Split::Validation) ++n_val;
        if (sp == Split::Train) ++n_train;
    }
    CHECK(n_test == 1);
    CHECK(n_val == 1);
    CHECK(n_train == 8);
}

TEST_CASE("split: equal counts break ties by subject id") {
    const std::vector<Subject> subjects = fake_subjects(std::vector<std::size_t>(20, 3));
    const SplitAssignment split = split_by_assessment_decile(subjects);
    CHECK(split.by_subject.at("S100") == Split::Test);
    CHECK(split.by_subject.at("S101") == Split::Test);
    CHECK(split.by_subject.at("S102") != Split::Test);
}

TEST_CASE("split: 280 subjects put 28 in test") {
    std::vector<std::size_t> counts(280);
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = i % 7 + 1;
    const std::vector<Subject> subjects = fake_subjects(counts);
    const SplitAssignment split = split_by_assessment_decile(subjects);
    std::size_t n_test = 0;
    for (const auto& [id, sp] : split.by_subject)
        if (sp == Split::Test) ++n_test;
    CHECK(n_test == 28);
}

TEST_CASE("split: too few subjects rejected; speaker disjointness holds") {
    CHECK_THROWS_AS(split_by_assessment_decile(fake_subjects({1, 2})), DataError);

    Dataset ds = generate_cohort(small_cohort());
    apply_split(ds, split_by_assessment_decile(ds.subjects));
    std::map<std::string, std::set<Split>> seen;
    for (const Sample& s : ds.samples) seen[s.subject_id].insert(*s.split);
    for (const auto& [id, splits] : seen) CHECK(splits.size() == 1);
}

TEST_CASE("dataset file: save then load round-trips") {
    Dataset ds = generate_cohort(small_cohort());
    apply_split(ds, split_by_assessment_decile(ds.subjects));
    const fs::path path = temp_file("roundtrip.jsonl");
    save_dataset(ds, path);
    const Dataset loaded = load_dataset(path);

    REQUIRE(loaded.samples.size() == ds.samples.size());
    CHECK(loaded.feature_dim == ds.feature_dim);
    CHECK(loaded.orderings.size() == ds.orderings.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(loaded.samples[i].sample_id == ds.samples[i].sample_id);
        CHECK(loaded.samples[i].subject_id == ds.samples[i].subject_id);
        CHECK(loaded.samples[i].time_days == ds.samples[i].time_days);
        CHECK(loaded.samples[i].features == ds.samples[i].features);  // full precision
        CHECK(loaded.samples[i].raw_labels == ds.samples[i].raw_labels);
        CHECK(loaded.samples[i].split == ds.samples[i].split);
        CHECK(loaded.samples[i].latent_severity == ds.samples[i].latent_severity);
    }
    CHECK(loaded.subjects.size() == ds.subjects.size());
}

TEST_CASE("dataset file: missing subscore labels are legal") {
    const fs::path path = temp_file("missing_label.jsonl");
    std::ofstream out(path);
    out << R"({"record":"header","version":1,"feature_dim":2,"orderings":[)"
        << R"({"name":"diagnosis","kind":"diagnosis","direction":"higher_is_more_severe"},)"
        << R"({"name":"sub","kind":"integer_scale","direction":"lower_is_more_severe"}]})"
        << "\n";
    out << R"({"record":"sample","sample_id":"a","subject_id":"s1","time_days":0,"features":[0.5,1.0],"labels":{"diagnosis":1}})"
        << "\n";
    out.close();
    const Dataset ds = load_dataset(path);
    REQUIRE(ds.samples.size() == 1);
    CHECK(ds.samples[0].raw_labels.count("sub") == 0);
    CHECK(ds.samples[0].raw_labels.at("diagnosis") == 1);
}

TEST_CASE("dataset file: wrong feature length names the line") {
    const fs::path path = temp_file("bad_features.jsonl");
    std::ofstream out(path);
    out << R"({"record":"header","version":1,"feature_dim":3,"orderings":[)"
        << R"({"name":"diagnosis","kind":"diagnosis","direction":"higher_is_more_severe"}]})"
        << "\n";
    out << R"({"record":"sample","sample_id":"a","subject_id":"s1","time_days":0,"features":[1.0],"labels":{"diagnosis":0}})"
        << "\n";
    out.close();
    try {
        load_dataset(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("features") != std::string::npos);
    }
}

TEST_CASE("dataset file: duplicate sample ids and unknown labels rejected") {
    const fs::path path = temp_file("dupes.jsonl");
    {
        std::ofstream out(path);
        out << R"({"record":"header","version":1,"feature_dim":1,"orderings":[)"
            << R"({"name":"diagnosis","kind":"diagnosis","direction":"higher_is_more_severe"}]})"
            << "\n"
            << R"({"record":"sample","sample_id":"a","subject_id":"s","time_days":0,"features":[0],"labels":{"diagnosis":0}})"
            << "\n"
            << R"({"record":"sample","sample_id":"a","subject_id":"s","time_days":1,"features":[0],"labels":{"diagnosis":0}})"
            << "\n";
    }
    CHECK_THROWS_AS(load_dataset(path), DataError);

    {
        std::ofstream out(path);
        out << R"({"record":"header","version":1,"feature_dim":1,"orderings":[)"
            << R"({"name":"diagnosis","kind":"diagnosis","direction":"higher_is_more_severe"}]})"
            << "\n"
            << R"({"record":"sample","sample_id":"a","subject_id":"s","time_days":0,"features":[0],"labels":{"diagnosis":0,"mystery":3}})"
            << "\n";
    }
    CHECK_THROWS_AS(load_dataset(path), DataError);
}

TEST_CASE("cohort config: unknown fields are rejected by name") {
    try {
        CohortConfig::from_json_text(R"({"n_hc": 5, "n_mdn": 3})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("n_mdn") != std::string::npos);
    }
    CHECK_THROWS_AS(CohortConfig::from_json_text(R"({"n_hc": 0})"), ConfigError);
}

TEST_CASE("sampler: batches have the requested size and stay in the split") {
    Dataset ds = generate_cohort(small_cohort());
    apply_split(ds, split_by_assessment_decile(ds.subjects));
    auto sampler = make_sampler("uniform", ds, Split::Train, 96, 7);
    const std::set<std::size_t> train(ds.split_indices(Split::Train).begin(),
                                      ds.split_indices(Split::Train).end());
    for (int b = 0; b < 20; ++b) {
        const std::vector<std::size_t> batch = sampler->next_batch();
        CHECK(batch.size() == 96);
        for (std::size_t idx : batch) CHECK(train.count(idx) == 1);
    }
}

TEST_CASE("sampler: identical seeds give identical streams") {
    Dataset ds = generate_cohort(small_cohort());
    apply_split(ds, split_by_assessment_decile(ds.subjects));
    for (const char* kind : {"uniform", "subject_stratified"}) {
        auto a = make_sampler(kind, ds, Split::Train, 32, 11);
        auto b = make_sampler(kind, ds, Split::Train, 32, 11);
        for (int i = 0; i < 50; ++i) CHECK(a->next_batch() == b->next_batch());
    }
}

TEST_CASE("sampler: per-sample inclusion is uniform over many batches") {
    Dataset ds = generate_cohort(small_cohort());
    apply_split(ds, split_by_assessment_decile(ds.subjects));
    const std::vector<std::size_t> train = ds.split_indices(Split::Train);
    auto sampler = make_sampler("uniform", ds, Split::Train, 96, 3);

    std::map<std::size_t, std::size_t> counts;
    const std::size_t n_batches = 10000;
    for (std::size_t b = 0; b < n_batches; ++b)
        for (std::size_t idx : sampler->next_batch()) ++counts[idx];

    // Each draw hits a given sample with p = 1/n; over B*96 draws the count
    // is Binomial(B*96, 1/n). Check every sample within 3 standard errors
    // ... allowing a few excursions just beyond (multiple testing).
    const double n = double(train.size());
    const double draws = double(n_batches) * 96.0;
    const double expected = draws / n;
    const double se = std::sqrt(draws * (1.0 / n) * (1.0 - 1.0 / n));
    std::size_t outliers = 0;
    for (std::size_t idx : train) {
        const double c = double(counts[idx]);
        if (std::fabs(c - expected) > 3.0 * se) ++outliers;
    }
    // ~0.27% of samples may legitimately sit outside 3 SE.
    CHECK(double(outliers) <= std::max(3.0, 0.01 * n));
}

TEST_CASE("sampler: stratified batches contain within-subject pairs") {
    Dataset ds = generate_cohort(small_cohort());
    apply_split(ds, split_by_assessment_decile(ds.subjects));
    auto sampler = make_sampler("subject_stratified", ds, Split::Train, 32, 5, 0.5);
    std::size_t batches_with_pairs = 0;
    for (int b = 0; b < 50; ++b) {
        const std::vector<std::size_t> batch = sampler->next_batch();
        std::map<std::int32_t, std::size_t> per_subject;
        for (std::size_t idx : batch) ++per_subject[ds.subject_of_sample[idx]];
        for (const auto& [s, c] : per_subject)
            if (c >= 2) {
                ++batches_with_pairs;
                break;
            }
    }
    CHECK(batches_with_pairs == 50);
}

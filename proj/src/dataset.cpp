#include "sevscore/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sevscore/errors.hpp"

namespace sevscore {

using nlohmann::json;

std::string to_string(Diagnosis d) { return d == Diagnosis::HC ? "HC" : "MND"; }

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw DataError("unknown split value: " + s);
}

const OrderingSystem* Dataset::find_ordering(const std::string& name) const {
    for (const OrderingSystem& o : orderings)
        if (o.name == name) return &o;
    return nullptr;
}

const OrderingSystem& Dataset::diagnosis_ordering() const {
    const OrderingSystem* found = nullptr;
    for (const OrderingSystem& o : orderings) {
        if (o.kind != OrderingKind::Diagnosis) continue;
        if (found) throw DataError("dataset declares more than one diagnosis ordering");
        found = &o;
    }
    if (!found) throw DataError("dataset declares no diagnosis ordering");
    return *found;
}

void Dataset::rebuild_index() {
    const OrderingSystem& diag = diagnosis_ordering();

    std::map<std::string, std::size_t> by_id;  // ordered: subjects sorted by id
    for (const Sample& s : samples) by_id.emplace(s.subject_id, 0);
    subjects.assign(by_id.size(), Subject{});
    std::size_t next = 0;
    for (auto& [id, idx] : by_id) {
        idx = next;
        subjects[next].subject_id = id;
        ++next;
    }

    subject_of_sample.assign(samples.size(), -1);
    std::vector<std::map<double, std::vector<std::size_t>>> times(subjects.size());
    std::vector<std::optional<std::int64_t>> diag_value(subjects.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const std::size_t si = by_id.at(s.subject_id);
        subject_of_sample[i] = static_cast<std::int32_t>(si);
        times[si][s.time_days].push_back(i);
        const auto it = s.raw_labels.find(diag.name);
        if (it == s.raw_labels.end())
            throw DataError("sample " + s.sample_id + " is missing the diagnosis label '" +
                            diag.name + "'");
        if (it->second != 0 && it->second != 1)
            throw DataError("sample " + s.sample_id + " has diagnosis value " +
                            std::to_string(it->second) + " (expected 0=HC or 1=MND)");
        if (diag_value[si].has_value() && *diag_value[si] != it->second)
            throw DataError("subject " + s.subject_id + " has inconsistent diagnosis labels");
        diag_value[si] = it->second;
    }

    for (std::size_t si = 0; si < subjects.size(); ++si) {
        subjects[si].diagnosis = *diag_value[si] == 1 ? Diagnosis::MND : Diagnosis::HC;
        subjects[si].assessments.clear();
        for (const auto& [t, idxs] : times[si])
            subjects[si].assessments.push_back(Assessment{t, idxs});
    }
}

std::vector<std::optional<double>> Dataset::raw_channel(const std::string& name) const {
    if (!find_ordering(name))
        throw DataError("dataset has no ordering named '" + name + "'");
    std::vector<std::optional<double>> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto it = samples[i].raw_labels.find(name);
        if (it != samples[i].raw_labels.end()) out[i] = double(it->second);
    }
    return out;
}

std::vector<std::size_t> Dataset::split_indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == split) out.push_back(i);
    return out;
}

std::vector<int> Dataset::diagnosis_labels() const {
    const std::string& name = diagnosis_ordering().name;
    std::vector<int> out(samples.size(), 0);
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = int(samples[i].raw_labels.at(name));
    return out;
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

SplitAssignment split_by_assessment_decile(const std::vector<Subject>& subjects,
                                           double test_fraction, double val_fraction) {
    const std::size_t n = subjects.size();
    if (n < 3)
        throw DataError("split_by_assessment_decile: need at least 3 subjects, got " +
                        std::to_string(n));
    if (test_fraction <= 0.0 || test_fraction >= 1.0 || val_fraction < 0.0 ||
        val_fraction >= 1.0)
        throw ConfigError("split fractions must lie in (0,1)");

    std::vector<const Subject*> order;
    order.reserve(n);
    for (const Subject& s : subjects) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const Subject* a, const Subject* b) {
        if (a->assessment_count() != b->assessment_count())
            return a->assessment_count() > b->assessment_count();
        return a->subject_id < b->subject_id;
    });

    std::size_t n_test = std::max<std::size_t>(1, std::size_t(std::llround(test_fraction * double(n))));
    n_test = std::min(n_test, n - 2);  // keep room for validation and train
    const std::size_t m = n - n_test;
    std::size_t n_val = std::max<std::size_t>(1, std::size_t(std::llround(val_fraction * double(m))));
    n_val = std::min(n_val, m - 1);

    SplitAssignment out;
    for (std::size_t i = 0; i < n; ++i) {
        Split sp = Split::Train;
        if (i < n_test)
            sp = Split::Test;
        else if (i < n_test + n_val)
            sp = Split::Validation;
        out.by_subject[order[i]->subject_id] = sp;
    }
    return out;
}

void apply_split(Dataset& dataset, const SplitAssignment& assignment) {
    for (Sample& s : dataset.samples) {
        const auto it = assignment.by_subject.find(s.subject_id);
        if (it == assignment.by_subject.end())
            throw DataError("apply_split: subject " + s.subject_id + " has no assignment");
        s.split = it->second;
    }
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

namespace {

json ordering_to_json(const OrderingSystem& o) {
    json j{{"name", o.name},
           {"kind", to_string(o.kind)},
           {"direction", to_string(o.direction)},
           {"weight", o.weight}};
    if (o.min_value) j["min_value"] = *o.min_value;
    if (o.max_value) j["max_value"] = *o.max_value;
    return j;
}

OrderingSystem ordering_from_json(const json& j) {
    OrderingSystem o;
    o.name = j.at("name").get<std::string>();
    o.kind = ordering_kind_from_string(j.at("kind").get<std::string>());
    o.direction = direction_from_string(j.at("direction").get<std::string>());
    if (j.contains("weight")) o.weight = j.at("weight").get<double>();
    if (j.contains("min_value")) o.min_value = j.at("min_value").get<std::int64_t>();
    if (j.contains("max_value")) o.max_value = j.at("max_value").get<std::int64_t>();
    if (o.name.empty()) throw DataError("ordering with empty name");
    if (o.weight <= 0.0) throw DataError("ordering " + o.name + ": weight must be positive");
    return o;
}

[[noreturn]] void line_error(std::size_t line_no, const std::string& msg) {
    throw DataError("dataset line " + std::to_string(line_no) + ": " + msg);
}

std::int64_t integral_label(const json& v, std::size_t line_no, const std::string& key) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::nearbyint(d) == d) return std::int64_t(d);
    }
    line_error(line_no, "label '" + key + "' is not an integer");
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");

    json header{{"record", "header"},
                {"version", 1},
                {"feature_dim", dataset.feature_dim}};
    header["orderings"] = json::array();
    for (const OrderingSystem& o : dataset.orderings)
        header["orderings"].push_back(ordering_to_json(o));
    out << header.dump() << "\n";

    for (const Sample& s : dataset.samples) {
        json rec{{"record", "sample"},
                 {"sample_id", s.sample_id},
                 {"subject_id", s.subject_id},
                 {"time_days", s.time_days},
                 {"features", s.features}};
        json labels = json::object();
        for (const auto& [k, v] : s.raw_labels) labels[k] = v;
        rec["labels"] = labels;
        if (s.split) rec["split"] = to_string(*s.split);
        if (s.latent_severity) rec["latent"] = *s.latent_severity;
        out << rec.dump() << "\n";
    }
    if (!out) throw DataError("write to " + path.string() + " failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file " + path.string());

    Dataset ds;
    std::set<std::string> seen_ids;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    static const std::set<std::string> sample_keys{
        "record", "sample_id", "subject_id", "time_days",
        "features", "labels", "split", "latent"};

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            line_error(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("record"))
            line_error(line_no, "record object with a 'record' field expected");
        const std::string kind = j.at("record").get<std::string>();

        if (kind == "header") {
            if (have_header) line_error(line_no, "duplicate header record");
            if (j.at("version").get<int>() != 1)
                line_error(line_no, "unsupported dataset version");
            ds.feature_dim = j.at("feature_dim").get<std::size_t>();
            if (ds.feature_dim == 0) line_error(line_no, "feature_dim must be positive");
            for (const json& oj : j.at("orderings")) {
                OrderingSystem o = ordering_from_json(oj);
                if (ds.find_ordering(o.name))
                    line_error(line_no, "duplicate ordering name '" + o.name + "'");
                ds.orderings.push_back(std::move(o));
            }
            have_header = true;
            continue;
        }
        if (kind != "sample") line_error(line_no, "unknown record type '" + kind + "'");
        if (!have_header) line_error(line_no, "sample record before header");

        for (const auto& [key, value] : j.items()) {
            (void)value;
            if (!sample_keys.count(key))
                line_error(line_no, "unknown field '" + key + "'");
        }

        Sample s;
        s.sample_id = j.at("sample_id").get<std::string>();
        s.subject_id = j.at("subject_id").get<std::string>();
        if (s.sample_id.empty() || s.subject_id.empty())
            line_error(line_no, "empty sample_id or subject_id");
        if (!seen_ids.insert(s.sample_id).second)
            line_error(line_no, "duplicate sample_id '" + s.sample_id + "'");
        s.time_days = j.at("time_days").get<double>();
        if (!std::isfinite(s.time_days) || s.time_days < 0.0)
            line_error(line_no, "time_days must be finite and non-negative");
        s.features = j.at("features").get<std::vector<double>>();
        if (s.features.size() != ds.feature_dim)
            line_error(line_no, "sample '" + s.sample_id + "' has " +
                                    std::to_string(s.features.size()) +
                                    " features, header declares " +
                                    std::to_string(ds.feature_dim));
        for (double v : s.features)
            if (!std::isfinite(v))
                line_error(line_no, "sample '" + s.sample_id + "' has a non-finite feature");
        for (const auto& [key, value] : j.at("labels").items()) {
            if (!ds.find_ordering(key))
                line_error(line_no, "label '" + key + "' is not a declared ordering");
            s.raw_labels[key] = integral_label(value, line_no, key);
        }
        if (j.contains("split")) s.split = split_from_string(j.at("split").get<std::string>());
        if (j.contains("latent")) s.latent_severity = j.at("latent").get<double>();
        ds.samples.push_back(std::move(s));
    }
    if (!have_header) throw DataError("dataset file " + path.string() + " has no header record");
    ds.rebuild_index();
    return ds;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

namespace {

class UniformSampler final : public BatchSampler {
public:
    UniformSampler(std::vector<std::size_t> indices, std::size_t batch_size,
                   std::uint64_t seed)
        : indices_(std::move(indices)), batch_size_(batch_size), rng_(seed) {
        if (indices_.empty()) throw DataError("sampler: split contains no samples");
    }

    std::vector<std::size_t> next_batch() override {
        std::uniform_int_distribution<std::size_t> pick(0, indices_.size() - 1);
        std::vector<std::size_t> batch(batch_size_);
        for (std::size_t& b : batch) b = indices_[pick(rng_)];
        return batch;
    }

private:
    std::vector<std::size_t> indices_;
    std::size_t batch_size_;
    std::mt19937_64 rng_;
};

class SubjectStratifiedSampler final : public BatchSampler {
public:
    SubjectStratifiedSampler(const Dataset& dataset, std::vector<std::size_t> indices,
                             std::size_t batch_size, std::uint64_t seed,
                             double pair_fraction)
        : indices_(std::move(indices)), batch_size_(batch_size),
          pair_fraction_(pair_fraction), rng_(seed) {
        if (indices_.empty()) throw DataError("sampler: split contains no samples");
        std::map<std::int32_t, std::vector<std::size_t>> groups;
        for (std::size_t idx : indices_) groups[dataset.subject_of_sample[idx]].push_back(idx);
        for (auto& [sid, members] : groups)
            if (members.size() >= 2) pairable_.push_back(std::move(members));
    }

    std::vector<std::size_t> next_batch() override {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick_any(0, indices_.size() - 1);
        std::vector<std::size_t> batch;
        batch.reserve(batch_size_);
        while (batch.size() < batch_size_) {
            if (!pairable_.empty() && batch_size_ - batch.size() >= 2 &&
                coin(rng_) < pair_fraction_) {
                std::uniform_int_distribution<std::size_t> pick_subj(0, pairable_.size() - 1);
                const auto& members = pairable_[pick_subj(rng_)];
                std::uniform_int_distribution<std::size_t> pick_i(0, members.size() - 1);
                std::uniform_int_distribution<std::size_t> pick_j(0, members.size() - 2);
                const std::size_t i = pick_i(rng_);
                std::size_t j = pick_j(rng_);
                if (j >= i) ++j;  // two distinct samples of the same subject
                batch.push_back(members[i]);
                batch.push_back(members[j]);
            } else {
                batch.push_back(indices_[pick_any(rng_)]);
            }
        }
        return batch;
    }

private:
    std::vector<std::size_t> indices_;
    std::size_t batch_size_;
    double pair_fraction_;
    std::vector<std::vector<std::size_t>> pairable_;
    std::mt19937_64 rng_;
};

}  // namespace

std::unique_ptr<BatchSampler> make_sampler(const std::string& kind,
                                           const Dataset& dataset, Split split,
                                           std::size_t batch_size, std::uint64_t seed,
                                           double subject_pair_fraction) {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    std::vector<std::size_t> indices = dataset.split_indices(split);
    if (kind == "uniform")
        return std::make_unique<UniformSampler>(std::move(indices), batch_size, seed);
    if (kind == "subject_stratified")
        return std::make_unique<SubjectStratifiedSampler>(dataset, std::move(indices),
                                                          batch_size, seed,
                                                          subject_pair_fraction);
    throw ConfigError("unknown sampler kind: " + kind);
}

}  // namespace sevscore

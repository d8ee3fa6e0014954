#include "sevscore/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sevscore/errors.hpp"

namespace sevscore {

using nlohmann::json;

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ChannelCorrelation correlate(const std::string& channel, const std::vector<double>& xs,
                             const std::vector<double>& ys) {
    ChannelCorrelation c;
    c.channel = channel;
    c.n = xs.size();
    if (xs.size() < 3) {
        c.undefined = true;
        return c;
    }
    try {
        const SpearmanResult r = spearman(xs, ys);
        c.rho = r.rho;
        c.p_value = r.p_value;
        c.significant = r.p_value < 0.05;
    } catch (const NumericError&) {
        c.undefined = true;
    }
    return c;
}

}  // namespace

EvalReport evaluate_scores(const Dataset& dataset,
                           std::span<const std::size_t> sample_indices,
                           std::span<const double> scores,
                           const std::string& system_name, const std::string& split_name) {
    if (sample_indices.size() != scores.size())
        throw DataError("evaluate_scores: indices and scores differ in length");
    if (sample_indices.empty()) throw DataError("evaluate_scores: empty split");

    EvalReport rep;
    rep.system = system_name;
    rep.split = split_name;
    rep.n_samples = sample_indices.size();

    const std::vector<int> diagnosis = dataset.diagnosis_labels();
    std::vector<int> labels(sample_indices.size());
    for (std::size_t k = 0; k < sample_indices.size(); ++k)
        labels[k] = diagnosis[sample_indices[k]];

    const ThresholdResult thr = oracle_threshold_accuracy(scores, labels);
    rep.accuracy = thr.accuracy;
    rep.oracle_threshold = thr.threshold;
    rep.degenerate_ties = thr.degenerate_ties;
    rep.auc = auc(scores, labels);
    const F1Result f1 = f1_at_threshold(scores, labels, thr.threshold);
    rep.f1 = f1.f1;
    rep.no_positive_predictions = f1.no_positive_predictions;

    // Correlations against raw (uninverted) label values, matching the
    // convention that agreement with a worst-is-low clinical scale shows
    // up as negative rho.
    for (const OrderingSystem& ord : dataset.orderings) {
        if (ord.kind == OrderingKind::Diagnosis) continue;
        std::vector<double> xs, ys;
        for (std::size_t k = 0; k < sample_indices.size(); ++k) {
            const Sample& s = dataset.samples[sample_indices[k]];
            const auto it = s.raw_labels.find(ord.name);
            if (it == s.raw_labels.end()) continue;
            xs.push_back(scores[k]);
            ys.push_back(double(it->second));
        }
        rep.correlations.push_back(correlate(ord.name, xs, ys));
    }
    {
        std::vector<double> xs, ys;
        for (std::size_t k = 0; k < sample_indices.size(); ++k) {
            const Sample& s = dataset.samples[sample_indices[k]];
            if (!s.latent_severity) continue;
            xs.push_back(scores[k]);
            ys.push_back(*s.latent_severity);
        }
        if (!xs.empty())
            rep.correlations.push_back(correlate("latent_severity", xs, ys));
    }

    rep.progression = progression_slopes(dataset, sample_indices, scores);
    std::vector<double> mnd_slopes, hc_slopes;
    for (const SubjectSlope& s : rep.progression.slopes)
        (s.diagnosis == Diagnosis::MND ? mnd_slopes : hc_slopes).push_back(s.slope);
    rep.median_slope_mnd = median_of(mnd_slopes);
    rep.median_slope_hc = median_of(hc_slopes);

    // Distribution summaries: by class, and by level of each integer scale.
    {
        std::map<std::string, std::vector<double>> by_class{{"HC", {}}, {"MND", {}}};
        for (std::size_t k = 0; k < sample_indices.size(); ++k)
            by_class[labels[k] ? "MND" : "HC"].push_back(scores[k]);
        rep.distributions.push_back(score_distribution_summary(by_class, "score_by_class"));
    }
    for (const OrderingSystem& ord : dataset.orderings) {
        if (ord.kind != OrderingKind::IntegerScale) continue;
        std::map<std::string, std::vector<double>> by_level;
        for (std::size_t k = 0; k < sample_indices.size(); ++k) {
            const Sample& s = dataset.samples[sample_indices[k]];
            const auto it = s.raw_labels.find(ord.name);
            if (it == s.raw_labels.end()) continue;
            by_level[ord.name + "=" + std::to_string(it->second)].push_back(scores[k]);
        }
        if (!by_level.empty())
            rep.distributions.push_back(
                score_distribution_summary(by_level, "score_by_" + ord.name));
    }
    return rep;
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& dataset,
                               Split split, const std::string& system_name) {
    const std::vector<std::size_t> indices = dataset.split_indices(split);
    if (indices.empty())
        throw DataError("evaluate_checkpoint: split '" + to_string(split) +
                        "' contains no samples");
    std::vector<double> scores(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k)
        scores[k] = ckpt.score(dataset.samples[indices[k]].features);
    return evaluate_scores(dataset, indices, scores, system_name, to_string(split));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json summary_to_json(const DistributionSummary& d) {
    json j{{"title", d.title},
           {"bin_lo", d.bin_lo},
           {"bin_hi", d.bin_hi},
           {"n_bins", d.n_bins},
           {"empty_groups", d.empty_groups}};
    if (d.dip_between_medians) j["dip_between_medians"] = *d.dip_between_medians;
    j["groups"] = json::array();
    for (const GroupSummary& g : d.groups)
        j["groups"].push_back(json{{"group", g.group},
                                   {"count", g.count},
                                   {"min", g.min},
                                   {"q1", g.q1},
                                   {"median", g.median},
                                   {"q3", g.q3},
                                   {"max", g.max},
                                   {"histogram", g.histogram}});
    return j;
}

DistributionSummary summary_from_json(const json& j) {
    DistributionSummary d;
    d.title = j.at("title").get<std::string>();
    d.bin_lo = j.at("bin_lo").get<double>();
    d.bin_hi = j.at("bin_hi").get<double>();
    d.n_bins = j.at("n_bins").get<std::size_t>();
    d.empty_groups = j.at("empty_groups").get<std::vector<std::string>>();
    if (j.contains("dip_between_medians"))
        d.dip_between_medians = j.at("dip_between_medians").get<bool>();
    for (const json& gj : j.at("groups")) {
        GroupSummary g;
        g.group = gj.at("group").get<std::string>();
        g.count = gj.at("count").get<std::size_t>();
        g.min = gj.at("min").get<double>();
        g.q1 = gj.at("q1").get<double>();
        g.median = gj.at("median").get<double>();
        g.q3 = gj.at("q3").get<double>();
        g.max = gj.at("max").get<double>();
        g.histogram = gj.at("histogram").get<std::vector<std::size_t>>();
        d.groups.push_back(std::move(g));
    }
    return d;
}

json report_to_json(const EvalReport& r) {
    json j{{"version", 1},
           {"system", r.system},
           {"split", r.split},
           {"n_samples", r.n_samples},
           {"accuracy", r.accuracy},
           {"auc", r.auc},
           {"f1", r.f1},
           {"oracle_threshold", r.oracle_threshold},
           {"degenerate_ties", r.degenerate_ties},
           {"no_positive_predictions", r.no_positive_predictions},
           {"median_slope_mnd", r.median_slope_mnd},
           {"median_slope_hc", r.median_slope_hc}};
    j["correlations"] = json::array();
    for (const ChannelCorrelation& c : r.correlations)
        j["correlations"].push_back(json{{"channel", c.channel},
                                         {"rho", c.rho},
                                         {"p_value", c.p_value},
                                         {"n", c.n},
                                         {"significant", c.significant},
                                         {"undefined", c.undefined}});
    j["slopes"] = json::array();
    for (const SubjectSlope& s : r.progression.slopes)
        j["slopes"].push_back(json{{"subject_id", s.subject_id},
                                   {"diagnosis", to_string(s.diagnosis)},
                                   {"slope", s.slope},
                                   {"n_assessments", s.n_assessments}});
    j["skipped_subjects"] = r.progression.skipped;
    j["distributions"] = json::array();
    for (const DistributionSummary& d : r.distributions)
        j["distributions"].push_back(summary_to_json(d));
    return j;
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.system = j.at("system").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.auc = j.at("auc").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.oracle_threshold = j.at("oracle_threshold").get<double>();
    r.degenerate_ties = j.at("degenerate_ties").get<bool>();
    r.no_positive_predictions = j.at("no_positive_predictions").get<bool>();
    r.median_slope_mnd = j.at("median_slope_mnd").get<double>();
    r.median_slope_hc = j.at("median_slope_hc").get<double>();
    for (const json& cj : j.at("correlations")) {
        ChannelCorrelation c;
        c.channel = cj.at("channel").get<std::string>();
        c.rho = cj.at("rho").get<double>();
        c.p_value = cj.at("p_value").get<double>();
        c.n = cj.at("n").get<std::size_t>();
        c.significant = cj.at("significant").get<bool>();
        c.undefined = cj.at("undefined").get<bool>();
        r.correlations.push_back(std::move(c));
    }
    for (const json& sj : j.at("slopes")) {
        SubjectSlope s;
        s.subject_id = sj.at("subject_id").get<std::string>();
        s.diagnosis = sj.at("diagnosis").get<std::string>() == "MND" ? Diagnosis::MND
                                                                     : Diagnosis::HC;
        s.slope = sj.at("slope").get<double>();
        s.n_assessments = sj.at("n_assessments").get<std::size_t>();
        r.progression.slopes.push_back(std::move(s));
    }
    r.progression.skipped = j.at("skipped_subjects").get<std::vector<std::string>>();
    for (const json& dj : j.at("distributions"))
        r.distributions.push_back(summary_from_json(dj));
    return r;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_metrics_csv(const EvalReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "system,split,accuracy,auc,f1";
    for (const ChannelCorrelation& c : r.correlations)
        out << "," << c.channel << "_rho," << c.channel << "_p," << c.channel
            << "_significant";
    out << "\n";
    out << csv_escape(r.system) << "," << r.split << "," << fmt(r.accuracy) << ","
        << fmt(r.auc) << "," << fmt(r.f1);
    for (const ChannelCorrelation& c : r.correlations) {
        if (c.undefined)
            out << ",,,";
        else
            out << "," << fmt(c.rho) << "," << fmt(c.p_value) << ","
                << (c.significant ? "1" : "0");
    }
    out << "\n";
}

}  // namespace

std::string render_histogram_svg(const DistributionSummary& d) {
    static const char* kColors[] = {"#4878a8", "#d1605e", "#6aa56e", "#b8860b",
                                    "#8064a2", "#5f9ea0"};
    const int width = 640, height = 240, margin = 40;
    const int plot_w = width - 2 * margin, plot_h = height - 2 * margin;

    std::size_t peak = 1;
    for (const GroupSummary& g : d.groups)
        for (std::size_t c : g.histogram) peak = std::max(peak, c);

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
        << height << "'>\n";
    svg << "<text x='" << margin << "' y='20' font-size='13' font-family='sans-serif'>"
        << d.title << "</text>\n";
    svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
        << width - margin << "' y2='" << height - margin
        << "' stroke='#333' stroke-width='1'/>\n";

    const std::size_t n_groups = std::max<std::size_t>(1, d.groups.size());
    for (std::size_t gi = 0; gi < d.groups.size(); ++gi) {
        const GroupSummary& g = d.groups[gi];
        const char* color = kColors[gi % 6];
        const double bar_w = double(plot_w) / double(d.n_bins);
        const double sub_w = bar_w / double(n_groups);
        for (std::size_t b = 0; b < g.histogram.size(); ++b) {
            if (g.histogram[b] == 0) continue;
            const double h = double(g.histogram[b]) / double(peak) * plot_h;
            const double x = margin + double(b) * bar_w + double(gi) * sub_w;
            svg << "<rect x='" << x << "' y='" << double(height - margin) - h
                << "' width='" << sub_w << "' height='" << h << "' fill='" << color
                << "' fill-opacity='0.8'/>\n";
        }
        svg << "<text x='" << width - margin - 150 << "' y='" << 20 + 14 * (gi + 1)
            << "' font-size='11' font-family='sans-serif' fill='" << color << "'>"
            << g.group << " (n=" << g.count << ")</text>\n";
    }
    svg << "<text x='" << margin << "' y='" << height - margin + 16
        << "' font-size='10' font-family='sans-serif'>" << fmt(d.bin_lo) << "</text>\n";
    svg << "<text x='" << width - margin - 40 << "' y='" << height - margin + 16
        << "' font-size='10' font-family='sans-serif'>" << fmt(d.bin_hi) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_report_files(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        if (!out) throw DataError("cannot write report.json under " + dir.string());
        out << report_to_json(report).dump(2) << "\n";
    }
    write_metrics_csv(report, dir / "metrics.csv");
    {
        std::ofstream out(dir / "slopes.csv");
        out << "subject_id,diagnosis,n_assessments,slope\n";
        for (const SubjectSlope& s : report.progression.slopes)
            out << csv_escape(s.subject_id) << "," << to_string(s.diagnosis) << ","
                << s.n_assessments << "," << fmt(s.slope) << "\n";
    }
    for (const DistributionSummary& d : report.distributions) {
        {
            std::ofstream out(dir / (d.title + ".csv"));
            out << "group,count,min,q1,median,q3,max";
            for (std::size_t b = 0; b < d.n_bins; ++b) out << ",bin_" << b;
            out << "\n";
            for (const GroupSummary& g : d.groups) {
                out << csv_escape(g.group) << "," << g.count << "," << fmt(g.min) << ","
                    << fmt(g.q1) << "," << fmt(g.median) << "," << fmt(g.q3) << ","
                    << fmt(g.max);
                for (std::size_t c : g.histogram) out << "," << c;
                out << "\n";
            }
        }
        std::ofstream svg(dir / (d.title + ".svg"));
        svg << render_histogram_svg(d);
    }
}

EvalReport load_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("report " + path.string() + ": invalid JSON: " + e.what());
    }
    return report_from_json(j);
}

void write_merged_reports(const std::vector<std::filesystem::path>& run_dirs,
                          const std::filesystem::path& out_dir) {
    if (run_dirs.empty()) throw ConfigError("report: no run directories given");
    std::vector<EvalReport> reports;
    for (const auto& dir : run_dirs) {
        if (!std::filesystem::exists(dir))
            throw DataError("report: run directory does not exist: " + dir.string());
        const auto path = dir / "reports" / "report.json";
        if (!std::filesystem::exists(path))
            throw DataError("report: missing " + path.string());
        reports.push_back(load_report_json(path));
    }

    // Channel union in first-seen order keeps the table columns stable.
    std::vector<std::string> channels;
    for (const EvalReport& r : reports)
        for (const ChannelCorrelation& c : r.correlations)
            if (std::find(channels.begin(), channels.end(), c.channel) == channels.end())
                channels.push_back(c.channel);

    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "comparison.csv");
    if (!out) throw DataError("cannot write comparison.csv under " + out_dir.string());
    out << "system,accuracy,auc,f1";
    for (const std::string& ch : channels) out << "," << ch << "_rho," << ch << "_p";
    out << "\n";
    for (const EvalReport& r : reports) {
        out << csv_escape(r.system) << "," << fmt(r.accuracy) << "," << fmt(r.auc) << ","
            << fmt(r.f1);
        for (const std::string& ch : channels) {
            const ChannelCorrelation* found = nullptr;
            for (const ChannelCorrelation& c : r.correlations)
                if (c.channel == ch && !c.undefined) found = &c;
            if (found)
                out << "," << fmt(found->rho) << "," << fmt(found->p_value);
            else
                out << ",,";
        }
        out << "\n";
    }

    std::ofstream svg(out_dir / "score_distributions.svg");
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='660' height='"
        << 250 * reports.size() << "'>\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (const DistributionSummary& d : reports[i].distributions) {
            if (d.title != "score_by_class") continue;
            DistributionSummary titled = d;
            titled.title = reports[i].system + ": " + d.title;
            svg << "<g transform='translate(10," << 250 * i << ")'>\n"
                << render_histogram_svg(titled) << "</g>\n";
        }
    }
    svg << "</svg>\n";
}

}  // namespace sevscore

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sevscore/dataset.hpp"
#include "sevscore/errors.hpp"
#include "sevscore/matrix.hpp"

namespace sevscore {

using nlohmann::json;

void CohortConfig::validate() const {
    if (n_hc < 1 || n_mnd < 1) throw ConfigError("cohort: subject counts must be >= 1");
    if (assessments_min < 1) throw ConfigError("cohort: assessments_min must be >= 1");
    if (assessments_mean < double(assessments_min))
        throw ConfigError("cohort: assessments_mean must be >= assessments_min");
    if (recordings_per_assessment < 1)
        throw ConfigError("cohort: recordings_per_assessment must be >= 1");
    if (feature_dim < 1) throw ConfigError("cohort: feature_dim must be >= 1");
    if (hc_severity_sd < 0.0 || sigma_obs < 0.0 || sigma_lab < 0.0 || mnd_rate_log_sd < 0.0)
        throw ConfigError("cohort: scale parameters must be >= 0");
    if (mnd_baseline_min > mnd_baseline_max)
        throw ConfigError("cohort: mnd_baseline_min must be <= mnd_baseline_max");
    if (mnd_rate_mean <= 0.0) throw ConfigError("cohort: mnd_rate_mean must be > 0");
    if (gap_days_min < 1.0 || gap_days_min > gap_days_max)
        throw ConfigError("cohort: assessment gaps must satisfy 1 <= min <= max");
    if (observation_map != "nonlinear" && observation_map != "linear")
        throw ConfigError("cohort: observation_map must be 'nonlinear' or 'linear'");
    if (subscore_name.empty()) throw ConfigError("cohort: subscore_name must not be empty");
}

namespace {

struct Field {
    const char* key;
    void (*apply)(CohortConfig&, const json&);
};

template <typename T, T CohortConfig::* Member>
void set_member(CohortConfig& c, const json& v) {
    c.*Member = v.get<T>();
}

const Field kFields[] = {
    {"n_hc", set_member<std::size_t, &CohortConfig::n_hc>},
    {"n_mnd", set_member<std::size_t, &CohortConfig::n_mnd>},
    {"assessments_min", set_member<std::size_t, &CohortConfig::assessments_min>},
    {"assessments_mean", set_member<double, &CohortConfig::assessments_mean>},
    {"recordings_per_assessment",
     set_member<std::size_t, &CohortConfig::recordings_per_assessment>},
    {"feature_dim", set_member<std::size_t, &CohortConfig::feature_dim>},
    {"hc_severity_mean", set_member<double, &CohortConfig::hc_severity_mean>},
    {"hc_severity_sd", set_member<double, &CohortConfig::hc_severity_sd>},
    {"mnd_baseline_min", set_member<double, &CohortConfig::mnd_baseline_min>},
    {"mnd_baseline_max", set_member<double, &CohortConfig::mnd_baseline_max>},
    {"mnd_rate_mean", set_member<double, &CohortConfig::mnd_rate_mean>},
    {"mnd_rate_log_sd", set_member<double, &CohortConfig::mnd_rate_log_sd>},
    {"gap_days_min", set_member<double, &CohortConfig::gap_days_min>},
    {"gap_days_max", set_member<double, &CohortConfig::gap_days_max>},
    {"sigma_obs", set_member<double, &CohortConfig::sigma_obs>},
    {"sigma_lab", set_member<double, &CohortConfig::sigma_lab>},
    {"observation_map", set_member<std::string, &CohortConfig::observation_map>},
    {"observation_seed", set_member<std::uint64_t, &CohortConfig::observation_seed>},
    {"subscore_for_controls", set_member<bool, &CohortConfig::subscore_for_controls>},
    {"subscore_name", set_member<std::string, &CohortConfig::subscore_name>},
    {"seed", set_member<std::uint64_t, &CohortConfig::seed>},
};

}  // namespace

CohortConfig CohortConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("cohort config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("cohort config: top-level object expected");
    CohortConfig cfg;
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const Field& f : kFields) {
            if (key == f.key) {
                try {
                    f.apply(cfg, value);
                } catch (const json::exception&) {
                    throw ConfigError("cohort config: field '" + key + "' has the wrong type");
                }
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("cohort config: unknown field '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

CohortConfig CohortConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string CohortConfig::to_json_text() const {
    json j{{"n_hc", n_hc},
           {"n_mnd", n_mnd},
           {"assessments_min", assessments_min},
           {"assessments_mean", assessments_mean},
           {"recordings_per_assessment", recordings_per_assessment},
           {"feature_dim", feature_dim},
           {"hc_severity_mean", hc_severity_mean},
           {"hc_severity_sd", hc_severity_sd},
           {"mnd_baseline_min", mnd_baseline_min},
           {"mnd_baseline_max", mnd_baseline_max},
           {"mnd_rate_mean", mnd_rate_mean},
           {"mnd_rate_log_sd", mnd_rate_log_sd},
           {"gap_days_min", gap_days_min},
           {"gap_days_max", gap_days_max},
           {"sigma_obs", sigma_obs},
           {"sigma_lab", sigma_lab},
           {"observation_map", observation_map},
           {"observation_seed", observation_seed},
           {"subscore_for_controls", subscore_for_controls},
           {"subscore_name", subscore_name},
           {"seed", seed}};
    return j.dump(2);
}

namespace {

/// Fixed severity-to-feature-basis map. The first component keeps the map
/// injective in s; the others add mild curvature.
std::vector<double> severity_basis(double s, bool nonlinear) {
    if (!nonlinear) return {s};
    return {s, std::tanh(0.5 * s), std::cos(0.8 * s), s / (1.0 + std::fabs(s))};
}

std::string pad3(std::size_t v) {
    std::string s = std::to_string(v);
    while (s.size() < 3) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

Dataset generate_cohort(const CohortConfig& cfg) {
    cfg.validate();

    Dataset ds;
    ds.feature_dim = cfg.feature_dim;

    OrderingSystem diag;
    diag.name = "diagnosis";
    diag.kind = OrderingKind::Diagnosis;
    diag.direction = Direction::HigherIsMoreSevere;
    ds.orderings.push_back(diag);

    OrderingSystem sub;
    sub.name = cfg.subscore_name;
    sub.kind = OrderingKind::IntegerScale;
    sub.direction = Direction::LowerIsMoreSevere;
    sub.min_value = 0;
    sub.max_value = 4;
    ds.orderings.push_back(sub);

    // The observation matrix has a seed of its own so cohorts with different
    // master seeds can share one feature geometry.
    const bool nonlinear = cfg.observation_map == "nonlinear";
    const std::size_t basis_dim = severity_basis(0.0, nonlinear).size();
    Matrix obs(cfg.feature_dim, basis_dim);
    {
        std::mt19937_64 obs_rng(cfg.observation_seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double scale = 1.0 / std::sqrt(double(basis_dim));
        for (double& v : obs.data) v = gauss(obs_rng) * scale;
    }

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double rate_mu_log =
        std::log(cfg.mnd_rate_mean) - 0.5 * cfg.mnd_rate_log_sd * cfg.mnd_rate_log_sd;

    const std::size_t n_total = cfg.n_hc + cfg.n_mnd;
    for (std::size_t si = 0; si < n_total; ++si) {
        const bool is_mnd = si >= cfg.n_hc;
        const std::string subject_id =
            (is_mnd ? "MND" : "HC") + pad3(is_mnd ? si - cfg.n_hc + 1 : si + 1);

        std::size_t n_assess = cfg.assessments_min;
        if (cfg.assessments_mean > double(cfg.assessments_min)) {
            std::poisson_distribution<std::size_t> extra(cfg.assessments_mean -
                                                         double(cfg.assessments_min));
            n_assess += extra(rng);
        }

        std::vector<double> times(n_assess, 0.0);
        for (std::size_t a = 1; a < n_assess; ++a) {
            const double gap = cfg.gap_days_min + unit(rng) * (cfg.gap_days_max - cfg.gap_days_min);
            times[a] = times[a - 1] + std::round(gap);
        }

        double baseline = 0.0, rate = 0.0;
        if (is_mnd) {
            baseline = cfg.mnd_baseline_min +
                       unit(rng) * (cfg.mnd_baseline_max - cfg.mnd_baseline_min);
            rate = std::exp(rate_mu_log + cfg.mnd_rate_log_sd * gauss(rng));
        } else {
            baseline = std::fabs(cfg.hc_severity_mean + cfg.hc_severity_sd * gauss(rng));
        }

        for (std::size_t a = 0; a < n_assess; ++a) {
            const double severity = baseline + rate * times[a];
            const double label_noise = cfg.sigma_lab > 0.0 ? cfg.sigma_lab * gauss(rng) : 0.0;
            const double raw_sub = std::round(4.0 - severity + label_noise);
            const std::int64_t subscore =
                std::int64_t(std::clamp(raw_sub, 0.0, 4.0));

            for (std::size_t r = 0; r < cfg.recordings_per_assessment; ++r) {
                Sample s;
                s.subject_id = subject_id;
                s.sample_id = subject_id + "_a" + pad3(a + 1) + "_r" + std::to_string(r + 1);
                s.time_days = times[a];
                s.latent_severity = severity;
                s.raw_labels["diagnosis"] = is_mnd ? 1 : 0;
                if (is_mnd || cfg.subscore_for_controls)
                    s.raw_labels[cfg.subscore_name] = subscore;

                const std::vector<double> basis = severity_basis(severity, nonlinear);
                s.features.assign(cfg.feature_dim, 0.0);
                for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < basis_dim; ++k) acc += obs(d, k) * basis[k];
                    if (cfg.sigma_obs > 0.0) acc += cfg.sigma_obs * gauss(rng);
                    s.features[d] = acc;
                }
                ds.samples.push_back(std::move(s));
            }
        }
    }

    ds.rebuild_index();
    return ds;
}

}  // namespace sevscore

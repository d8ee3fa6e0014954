#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sevscore/dataset.hpp"
#include "sevscore/errors.hpp"
#include "sevscore/report.hpp"
#include "sevscore/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads an optional JSON config file and applies --set key=value overrides,
// so every config field is reachable from the command line.
std::string merged_config_text(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
    json j = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw sevscore::ConfigError("cannot open config file " + config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        try {
            j = json::parse(buf.str());
        } catch (const json::parse_error& e) {
            throw sevscore::ConfigError("config " + config_path + ": invalid JSON: " +
                                        e.what());
        }
        if (!j.is_object())
            throw sevscore::ConfigError("config " + config_path + ": object expected");
    }
    for (const std::string& kv : overrides) {
        const auto pos = kv.find('=');
        if (pos == std::string::npos || pos == 0)
            throw sevscore::ConfigError("--set expects key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, pos);
        const std::string value = kv.substr(pos + 1);
        try {
            j[key] = json::parse(value);
        } catch (const json::parse_error&) {
            j[key] = value;  // bare strings need no quoting
        }
    }
    return j.dump();
}

fs::path default_run_root() {
    if (const char* env = std::getenv("SEVSCORE_RUN_DIR")) return fs::path(env);
    return fs::path("runs");
}

int cmd_generate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_path, double test_fraction, double val_fraction,
                 bool no_split) {
    const sevscore::CohortConfig cfg =
        sevscore::CohortConfig::from_json_text(merged_config_text(config_path, overrides));
    sevscore::Dataset ds = sevscore::generate_cohort(cfg);
    if (!no_split)
        sevscore::apply_split(
            ds, sevscore::split_by_assessment_decile(ds.subjects, test_fraction, val_fraction));
    sevscore::save_dataset(ds, out_path);

    std::size_t n_hc = 0, n_mnd = 0, min_a = SIZE_MAX, max_a = 0, total_a = 0;
    for (const sevscore::Subject& s : ds.subjects) {
        (s.diagnosis == sevscore::Diagnosis::MND ? n_mnd : n_hc) += 1;
        min_a = std::min(min_a, s.assessment_count());
        max_a = std::max(max_a, s.assessment_count());
        total_a += s.assessment_count();
    }
    std::cout << "wrote " << out_path << "\n"
              << "subjects: " << ds.subjects.size() << " (HC " << n_hc << ", MND " << n_mnd
              << ")\n"
              << "samples: " << ds.samples.size() << " (feature dim " << ds.feature_dim
              << ")\n"
              << "assessments per subject: min " << min_a << ", mean "
              << double(total_a) / double(ds.subjects.size()) << ", max " << max_a << "\n";
    if (!no_split) {
        for (const sevscore::Split sp :
             {sevscore::Split::Train, sevscore::Split::Validation, sevscore::Split::Test})
            std::cout << to_string(sp) << " samples: " << ds.split_indices(sp).size()
                      << "\n";
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& data_path, std::string run_dir, bool resume, bool quiet) {
    const sevscore::TrainConfig cfg =
        sevscore::TrainConfig::from_json_text(merged_config_text(config_path, overrides));
    const sevscore::Dataset ds = sevscore::load_dataset(data_path);
    if (run_dir.empty()) run_dir = (default_run_root() / cfg.name).string();
    const sevscore::RunManifest manifest =
        sevscore::run_training(cfg, ds, data_path, run_dir, resume, !quiet);
    std::cout << "run dir: " << run_dir << "\n"
              << "best validation accuracy " << manifest.best_val_accuracy << " at batch "
              << manifest.best_batch << " (" << manifest.best_checkpoint << ")\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& split, std::string out_dir, std::string system_name) {
    const sevscore::Checkpoint ckpt = sevscore::load_checkpoint(checkpoint_path);
    const sevscore::Dataset ds = sevscore::load_dataset(data_path);
    if (out_dir.empty()) {
        const fs::path p = fs::path(checkpoint_path).parent_path();
        out_dir = (p.filename() == "checkpoints" ? p.parent_path() / "reports"
                                                 : fs::path("reports"))
                      .string();
    }
    if (system_name.empty()) system_name = fs::path(checkpoint_path).stem().string();
    const sevscore::EvalReport report = sevscore::evaluate_checkpoint(
        ckpt, ds, sevscore::split_from_string(split), system_name);
    sevscore::write_report_files(report, out_dir);

    std::cout << "reports under " << out_dir << "\n"
              << "accuracy " << report.accuracy << "  auc " << report.auc << "  f1 "
              << report.f1 << "  threshold " << report.oracle_threshold << "\n";
    for (const sevscore::ChannelCorrelation& c : report.correlations) {
        if (c.undefined)
            std::cout << "rho(" << c.channel << ") undefined (n=" << c.n << ")\n";
        else
            std::cout << "rho(" << c.channel << ") " << c.rho << "  p " << c.p_value
                      << (c.significant ? "  *" : "") << "  (n=" << c.n << ")\n";
    }
    std::cout << "median slope MND " << report.median_slope_mnd << "  HC "
              << report.median_slope_hc << " (" << report.progression.slopes.size()
              << " subjects, " << report.progression.skipped.size() << " skipped)\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
    sevscore::write_merged_reports(dirs, out_dir);
    std::cout << "wrote " << (fs::path(out_dir) / "comparison.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"severity-score training and evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_path = "dataset.jsonl";
    std::vector<std::string> overrides;
    double test_fraction = 0.10, val_fraction = 0.12;
    bool no_split = false;
    auto* generate = app.add_subcommand("generate", "generate a synthetic cohort dataset");
    generate->add_option("--config", config_path, "cohort config JSON");
    generate->add_option("--set", overrides, "override a config field (key=value)");
    generate->add_option("--out", out_path, "output dataset path");
    generate->add_option("--test-fraction", test_fraction, "held-out top-decile fraction");
    generate->add_option("--val-fraction", val_fraction, "validation fraction of the rest");
    generate->add_flag("--no-split", no_split, "skip split assignment");

    std::string data_path, run_dir;
    bool resume = false, quiet = false;
    auto* train = app.add_subcommand("train", "train a scoring model");
    train->add_option("--config", config_path, "train config JSON");
    train->add_option("--set", overrides, "override a config field (key=value)");
    train->add_option("--data", data_path, "dataset path")->required();
    train->add_option("--run-dir", run_dir,
                      "run directory (default $SEVSCORE_RUN_DIR/<name>)");
    train->add_flag("--resume", resume, "resume from the run's manifest");
    train->add_flag("--quiet", quiet, "suppress per-evaluation progress lines");

    std::string checkpoint_path, split = "test", system_name, eval_out;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--data", data_path, "dataset path")->required();
    eval->add_option("--split", split, "train | validation | test");
    eval->add_option("--out", eval_out, "report directory (default <run>/reports)");
    eval->add_option("--system", system_name, "system name used in report rows");

    std::vector<std::string> run_dirs;
    std::string report_out = "reports";
    auto* report = app.add_subcommand("report", "merge run reports into comparison tables");
    report->add_option("run_dirs", run_dirs, "run directories")->required();
    report->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed())
            return cmd_generate(config_path, overrides, out_path, test_fraction,
                                val_fraction, no_split);
        if (train->parsed())
            return cmd_train(config_path, overrides, data_path, run_dir, resume, quiet);
        if (eval->parsed())
            return cmd_eval(checkpoint_path, data_path, split, eval_out, system_name);
        if (report->parsed()) return cmd_report(run_dirs, report_out);
    } catch (const sevscore::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const sevscore::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const sevscore::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sevscore/checkpoint.hpp"
#include "sevscore/dataset.hpp"
#include "sevscore/metrics.hpp"

namespace sevscore {

/// Full evaluation of a frozen score set: classification metrics at the
/// split-fitted oracle threshold, rank correlations against every stored
/// label channel (and latent ground truth when present), per-subject
/// progression slopes, and score distribution summaries.
EvalReport evaluate_scores(const Dataset& dataset,
                           std::span<const std::size_t> sample_indices,
                           std::span<const double> scores,
                           const std::string& system_name, const std::string& split_name);

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& dataset,
                               Split split, const std::string& system_name);

/// Writes report.json, metrics.csv, slopes.csv, one CSV and SVG per
/// distribution summary. Filenames are fixed; contents deterministic.
void write_report_files(const EvalReport& report, const std::filesystem::path& dir);

EvalReport load_report_json(const std::filesystem::path& path);

/// Merges the reports/report.json of several run directories into one
/// comparison table (CSV columns: accuracy, AUC, F1, per-channel rho and p)
/// plus a stacked distribution SVG. Rows follow the argument order.
void write_merged_reports(const std::vector<std::filesystem::path>& run_dirs,
                          const std::filesystem::path& out_dir);

std::string render_histogram_svg(const DistributionSummary& summary);

}  // namespace sevscore

#pragma once

// Collation of evaluation reports into one summary.
//
// summary.json:
//   {"reports": [{"name", "task", "method", "cells", "seeds",
//                 "metrics": {"<metric>": {"mean", "sd"}},
//                 "class_names": [...], "roc_auc": [...], "macro_auc",
//                 "importance_top": [{"name", "score"}],
//                 "curves": ["curves/<name>_cum_mae.csv", ...]}]}
// Entries follow the lexicographic order of the report directory names.
// macro_auc, roc_auc and class_names appear for classification tasks only;
// NaN AUCs are written as null.
//
// curves/<name>_cum_mae.csv   cells,cum_mae
// curves/<name>_roc_<class>.csv   fpr,tpr,threshold

#include <filesystem>
#include <string>
#include <vector>

#include "batdeg/pipeline/task.hpp"

namespace batdeg::pipeline {

struct NamedReport {
    std::string name; ///< directory name
    EvalReport report;
};

/// Every immediate subdirectory of `dir` holding a report.json, sorted by name.
std::vector<NamedReport> collect_reports(const std::filesystem::path& dir);

/// summary.json text for the given reports.
std::string summary_json(const std::vector<NamedReport>& reports);

/// Writes summary.json and curves/ under `out`; returns the summary text.
std::string write_summary(const std::vector<NamedReport>& reports, const std::filesystem::path& out);

} // namespace batdeg::pipeline

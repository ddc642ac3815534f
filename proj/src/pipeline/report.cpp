#include "batdeg/pipeline/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "json.hpp"

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"

namespace batdeg::pipeline {

namespace {

using nlohmann::json;

std::string file_part(const std::string& s) {
    std::string out;
    for (char c : s) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    return out;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cum_mae_name(const NamedReport& r) { return "curves/" + file_part(r.name) + "_cum_mae.csv"; }
std::string roc_name(const NamedReport& r, const std::string& cls) {
    return "curves/" + file_part(r.name) + "_roc_" + file_part(cls) + ".csv";
}

json entry(const NamedReport& nr) {
    const auto& r = nr.report;
    json e;
    e["name"] = nr.name;
    e["task"] = r.task;
    e["method"] = r.method;
    e["cells"] = r.cell_ids.size();
    e["seeds"] = r.seeds.size();
    json metrics = json::object();
    for (const auto& [k, v] : r.aggregate) {
        metrics[k] = {{"mean", num(v.mean)}, {"sd", num(v.sd)}};
    }
    e["metrics"] = metrics;
    json curves = json::array();
    if (!r.cum_mae.empty()) {
        curves.push_back(cum_mae_name(nr));
    }
    if (!r.class_names.empty()) {
        e["class_names"] = r.class_names;
        json aucs = json::array();
        for (double a : r.roc_auc) {
            aucs.push_back(num(a));
        }
        e["roc_auc"] = aucs;
        e["macro_auc"] = num(r.macro_auc);
        for (std::size_t c = 0; c < r.roc.size() && c < r.class_names.size(); ++c) {
            if (!r.roc[c].empty()) {
                curves.push_back(roc_name(nr, r.class_names[c]));
            }
        }
    }
    json imp = json::array();
    for (const auto& [name, score] : r.importance_top) {
        imp.push_back({{"name", name}, {"score", num(score)}});
    }
    e["importance_top"] = imp;
    e["curves"] = curves;
    return e;
}

} // namespace

std::vector<NamedReport> collect_reports(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ValidationError("report directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> dirs;
    for (const auto& d : std::filesystem::directory_iterator(dir)) {
        if (d.is_directory() && std::filesystem::exists(d.path() / "report.json")) {
            dirs.push_back(d.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<NamedReport> out;
    for (const auto& d : dirs) {
        try {
            out.push_back({d.filename().string(), EvalReport::read(d)});
        } catch (const json::exception& e) {
            throw ValidationError((d / "report.json").string() + ": " + e.what());
        }
    }
    return out;
}

std::string summary_json(const std::vector<NamedReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports) {
        arr.push_back(entry(r));
    }
    return json{{"reports", arr}}.dump(2) + "\n";
}

std::string write_summary(const std::vector<NamedReport>& reports, const std::filesystem::path& out) {
    std::filesystem::create_directories(out / "curves");
    for (const auto& nr : reports) {
        const auto& r = nr.report;
        if (!r.cum_mae.empty()) {
            std::string csv = "cells,cum_mae\n";
            for (std::size_t k = 0; k < r.cum_mae.size(); ++k) {
                csv += std::to_string(k + 1) + "," + io::format_double(r.cum_mae[k]) + "\n";
            }
            io::write_file_atomic(out / cum_mae_name(nr), csv);
        }
        for (std::size_t c = 0; c < r.roc.size() && c < r.class_names.size(); ++c) {
            if (r.roc[c].empty()) {
                continue;
            }
            std::string csv = "fpr,tpr,threshold\n";
            for (const auto& p : r.roc[c]) {
                csv += io::format_double(p.fpr) + "," + io::format_double(p.tpr) + "," +
                       io::format_double(p.threshold) + "\n";
            }
            io::write_file_atomic(out / roc_name(nr, r.class_names[c]), csv);
        }
    }
    auto text = summary_json(reports);
    io::write_file_atomic(out / "summary.json", text);
    return text;
}

} // namespace batdeg::pipeline

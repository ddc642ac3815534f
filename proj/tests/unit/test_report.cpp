#include <filesystem>

#include "json.hpp"

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"
#include "batdeg/pipeline/report.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace batdeg;
using namespace batdeg::pipeline;

namespace {

EvalReport life_report() {
    EvalReport r;
    r.task = "life";
    r.method = "forest";
    r.cell_ids = {"a", "b", "c"};
    r.targets = {100, 200, 300};
    SeedResult s;
    s.seed = 4;
    s.train = {0, 1};
    s.test = {2};
    s.test_pred = {310};
    r.seeds.push_back(s);
    r.aggregate["test_mape"] = {3.5, 0.0};
    r.cum_mae = {10.0};
    r.importance_top = {{"f1", 0.75}, {"f2", 0.25}};
    return r;
}

EvalReport knee_report() {
    EvalReport r;
    r.task = "knee";
    r.method = "forest";
    r.cell_ids = {"a", "b"};
    r.targets = {0, 1};
    r.class_names = {"no_knee", "knee"};
    r.roc = {{{0, 0, 1}, {1, 1, 0}}, {}};
    r.roc_auc = {1.0, std::numeric_limits<double>::quiet_NaN()};
    r.macro_auc = 1.0;
    return r;
}

} // namespace

TEST_CASE("report collation writes summary and curves in name order") {
    const auto dir = fs::temp_directory_path() / "batdeg_report_collate";
    fs::remove_all(dir);
    life_report().write(dir / "life-forest");
    knee_report().write(dir / "knee-forest");
    fs::create_directories(dir / "unrelated");

    const auto reports = collect_reports(dir);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].name == "knee-forest");
    CHECK(reports[1].name == "life-forest");

    const auto text = write_summary(reports, dir);
    CHECK(io::read_file(dir / "summary.json") == text);
    CHECK(summary_json(collect_reports(dir)) == text);

    const auto j = nlohmann::json::parse(text);
    const auto& knee = j.at("reports").at(0);
    CHECK(knee.at("macro_auc").get<double>() == 1.0);
    CHECK(knee.at("roc_auc").at(1).is_null());
    CHECK(knee.at("curves").size() == 1);
    CHECK(fs::exists(dir / knee.at("curves").at(0).get<std::string>()));

    const auto& life = j.at("reports").at(1);
    CHECK_FALSE(life.contains("macro_auc"));
    CHECK(life.at("metrics").at("test_mape").at("mean").get<double>() == 3.5);
    CHECK(life.at("importance_top").at(0).at("name") == "f1");
    CHECK(io::read_file(dir / "curves/life-forest_cum_mae.csv") == "cells,cum_mae\n1,10\n");
}

TEST_CASE("report collation rejects a missing directory") {
    CHECK_THROWS_AS(collect_reports("/nonexistent/batdeg/reports"), ValidationError);
}

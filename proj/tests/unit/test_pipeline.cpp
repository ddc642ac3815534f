#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"

#include "batdeg/cell/cell.hpp"
#include "batdeg/error.hpp"
#include "batdeg/pipeline/baseline.hpp"
#include "batdeg/pipeline/metrics.hpp"
#include "batdeg/pipeline/task.hpp"
#include "batdeg/pipeline/xps.hpp"

using namespace batdeg;
using namespace batdeg::pipeline;

TEST_CASE("regression metrics") {
    const std::vector<double> y{100.0};
    const std::vector<double> p{110.0};
    CHECK(mape(y, p) == doctest::Approx(10.0));
    CHECK(mae(y, p) == doctest::Approx(10.0));
    CHECK(rmse(y, p) == doctest::Approx(10.0));
    const std::vector<double> a{3.0, 5.0, 8.0};
    const auto m = regression_metrics(a, a);
    CHECK(m.mape == 0.0);
    CHECK(m.mae == 0.0);
    CHECK(m.rmse == 0.0);
    const std::vector<double> z{0.0, 1.0};
    const std::vector<std::string> ids{"cell-007", "cell-008"};
    try {
        (void)mape(z, z, ids);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("cell-007") != std::string::npos);
    }
    CHECK_THROWS_AS(mae(a, y), ValidationError);
}

TEST_CASE("cumulated MAE curve") {
    const std::vector<double> e{4.0, 2.0, 0.0};
    const auto c = cumulated_mae_curve(e);
    CHECK(c == std::vector<double>{4.0, 3.0, 2.0});
}

TEST_CASE("ROC and AUC") {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    const std::vector<int> l{1, 1, 0, 0};
    CHECK(roc_auc(s, l) == 1.0);
    const std::vector<int> inv{0, 0, 1, 1};
    CHECK(roc_auc(s, inv) == 0.0);
    // All scores tied: the diagonal.
    const std::vector<double> tied{0.5, 0.5, 0.5, 0.5};
    CHECK(roc_auc(tied, l) == doctest::Approx(0.5));
    const auto curve = roc_curve(s, l);
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.back().tpr == 1.0);
    CHECK(curve.back().fpr == 1.0);
    CHECK_THROWS_AS(roc_auc(s, std::vector<int>{1, 1, 1, 1}), ValidationError);

    // Mann-Whitney oracle: AUC = P(score_pos > score_neg) + P(tie) / 2.
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> small(0, 9);
    std::vector<double> sc;
    std::vector<int> lab;
    for (int k = 0; k < 300; ++k) {
        sc.push_back(small(rng));
        lab.push_back(static_cast<int>(rng() % 2));
    }
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < sc.size(); ++i) {
        for (std::size_t j = 0; j < sc.size(); ++j) {
            if (lab[i] == 1 && lab[j] == 0) {
                pairs += 1.0;
                wins += sc[i] > sc[j] ? 1.0 : (sc[i] == sc[j] ? 0.5 : 0.0);
            }
        }
    }
    CHECK(roc_auc(sc, lab) == doctest::Approx(wins / pairs).epsilon(1e-12));
}

TEST_CASE("random scores give AUC near one half") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s;
    std::vector<int> l;
    for (int k = 0; k < 10000; ++k) {
        s.push_back(u(rng));
        l.push_back(k % 2);
    }
    CHECK(std::abs(roc_auc(s, l) - 0.5) <= 0.02);
}

TEST_CASE("one-vs-rest ROC with an absent class") {
    Matrix p = Matrix::from_rows({{0.8, 0.1, 0.1}, {0.2, 0.7, 0.1}, {0.6, 0.3, 0.1}, {0.1, 0.8, 0.1}});
    const std::vector<int> l{0, 1, 0, 1};
    const auto r = one_vs_rest(p, l);
    CHECK(r.auc[0] == 1.0);
    CHECK(r.auc[1] == 1.0);
    CHECK(std::isnan(r.auc[2]));
    CHECK(r.macro_auc == 1.0);
}

TEST_CASE("XPS fixture: listed groups reproduce the listed centres") {
    const auto samples = xps_fixture();
    REQUIRE(samples.size() == 56);
    for (const auto& c : xps_fixture_centers()) {
        std::array<double, kXpsElements> mean{};
        int count = 0;
        for (const auto& s : samples) {
            if (s.group == c.group) {
                for (std::size_t e = 0; e < kXpsElements; ++e) {
                    mean[e] += s.fractions[e];
                }
                ++count;
            }
        }
        REQUIRE(count > 0);
        for (std::size_t e = 0; e < kXpsElements; ++e) {
            CHECK(std::abs(mean[e] / count - c.center[e]) <= 1e-3);
        }
    }
    // Group 2, Li1s: 195.366 / 6.
    double li = 0.0;
    for (const auto& s : samples) {
        li += s.group == 2 ? s.fractions[0] : 0.0;
    }
    CHECK(li == doctest::Approx(195.366));

    const auto pats = xps_listed_patterns(samples);
    REQUIRE(pats.patterns.size() == 6);
    CHECK(pats.excluded.size() == 2);
    CHECK(pats.excluded_clusters == std::vector<int>{4, 5});
    CHECK(samples[pats.excluded[0]].data_tag == "25C-11");
    CHECK(samples[pats.excluded[1]].data_tag == "70C-14");
    const std::vector<std::string> names{"LT-SL", "MT-MLL", "MT-SL", "MT-ML", "HT-LL", "HT-LRL"};
    for (std::size_t p = 0; p < 6; ++p) {
        CHECK(pats.patterns[p].name == names[p]);
    }
    CHECK(pats.patterns[0].members.size() == 6);
}

TEST_CASE("XPS fixture reconciliation reports the known table inconsistencies") {
    const auto issues = xps_check(xps_fixture_rows());
    std::vector<std::string> sum_rows;
    std::vector<std::string> pf_rows;
    std::size_t ratio_rows = 0;
    bool flagged_19 = false;
    for (const auto& i : issues) {
        if (i.check == "fraction sum") {
            sum_rows.push_back(i.data_tag);
        }
        if (i.check == "PF = F1s + P2p") {
            pf_rows.push_back(i.data_tag);
        }
        ratio_rows += i.check == "CO/(CO+PF)" ? 1 : 0;
        flagged_19 = flagged_19 || i.data_tag == "25C-19";
    }
    CHECK(sum_rows == std::vector<std::string>{"25C-15", "25C-17", "30C-40"});
    CHECK(pf_rows == std::vector<std::string>{"25C-15", "25C-4", "25C-17", "25C-11", "30C-35", "30C-40"});
    CHECK(ratio_rows == 22);
    // 0.78732 recomputed vs 0.787074 listed: inside the tolerance.
    CHECK_FALSE(flagged_19);
    for (const auto& r : xps_fixture_rows()) {
        CHECK(std::abs(r.sample.co() - r.listed_co) < 1e-6);
    }
}

TEST_CASE("XPS k-means naming and CSV round trip") {
    auto samples = xps_fixture();
    XpsPatternOptions opt;
    opt.seed = 1;
    opt.reference = xps_fixture_centers();
    const auto pats = xps_patterns(samples, opt);
    std::size_t assigned = 0;
    for (int p : pats.pattern_of) {
        assigned += p > 0 ? 1 : 0;
    }
    CHECK(assigned + pats.excluded.size() == 56);
    CHECK(pats.inertia > 0.0);

    std::stringstream ss;
    write_xps_csv(ss, samples);
    const auto back = read_xps_csv(ss, "mem");
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].data_tag == samples[i].data_tag);
        CHECK(back[i].fractions == samples[i].fractions);
        CHECK(back[i].group == samples[i].group);
    }

    std::vector<XpsSample> dup(3, samples[0]);
    XpsPatternOptions one;
    one.k = 1;
    const auto single = xps_patterns(dup, one);
    CHECK(single.patterns.size() == 1);
    CHECK(single.inertia == 0.0);
    CHECK_THROWS_AS(xps_patterns(dup, {}), ValidationError);
}

TEST_CASE("ordinary least squares and the variance model") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{3.0, 5.0, 7.0, 9.0};
    const auto f = ols(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));

    // life = 10^(2 - 0.5 log10 var): exactly log-linear.
    std::vector<double> var;
    std::vector<double> life;
    for (int k = 1; k <= 12; ++k) {
        var.push_back(std::pow(10.0, -k / 3.0));
        life.push_back(std::pow(10.0, 2.0 - 0.5 * std::log10(var.back())));
    }
    const std::vector<double> tr_v(var.begin(), var.begin() + 8);
    const std::vector<double> tr_l(life.begin(), life.begin() + 8);
    std::vector<double> te_v(var.begin() + 8, var.end());
    const std::vector<double> te_l(life.begin() + 8, life.end());
    te_v.push_back(0.0);
    std::vector<double> te_l2 = te_l;
    te_l2.push_back(500.0);
    const auto s = baseline_variance_model(tr_v, tr_l, te_v, te_l2);
    CHECK(s.test.mape < 0.5);
    CHECK(s.dropped_test == std::vector<std::size_t>{4});
    CHECK_THROWS_AS(baseline_variance_model(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}, te_v,
                                            te_l2),
                    ValidationError);
}

namespace {

cell::CellHistory fading_cell(double fade, std::size_t cycles) {
    cell::CellParams p;
    p.fade_per_cycle = fade;
    cell::LifeOptions lo;
    lo.dt = 10.0;
    lo.max_cycles = cycles;
    std::vector<protocol::ProtocolSpec> protos(cycles, {"c", 0, {{20000.0, 6.0}}, 1});
    return cell::run_life("c", p, protos, {}, lo);
}

} // namespace

TEST_CASE("delta Q curve") {
    const auto h = fading_cell(0.004, 50);
    const auto same = delta_q_curve(h, 10, 10);
    for (double v : same) {
        CHECK((std::isnan(v) || v == 0.0));
    }
    const auto d = delta_q_curve(h, 10, 50);
    std::size_t neg = 0;
    std::size_t finite = 0;
    for (double v : d) {
        if (std::isfinite(v)) {
            ++finite;
            neg += v < 0 ? 1 : 0;
        }
    }
    CHECK(finite > 50);
    CHECK(neg > finite * 9 / 10);
    CHECK(std::isfinite(delta_q_variance(h, 10, 50)));
    CHECK_THROWS_AS(delta_q_curve(h, 10, 60), ValidationError);
}

namespace {

features::FeatureMatrix synthetic_matrix(std::size_t n, std::uint64_t seed, std::vector<double>& x0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    features::FeatureMatrix m;
    m.values = Matrix(n, 6);
    for (std::size_t c = 0; c < 6; ++c) {
        m.names.push_back("f" + std::to_string(c));
    }
    for (std::size_t r = 0; r < n; ++r) {
        m.cell_ids.push_back("cell-" + std::to_string(r));
        for (std::size_t c = 0; c < 6; ++c) {
            m.values(r, c) = u(rng);
        }
        x0.push_back(m.values(r, 2));
    }
    return m;
}

} // namespace

TEST_CASE("life task on a smooth synthetic target") {
    std::vector<double> x0;
    const auto m = synthetic_matrix(150, 5, x0);
    std::vector<double> life;
    for (double v : x0) {
        life.push_back(300.0 + 400.0 * v);
    }
    TaskConfig cfg;
    cfg.seeds = 4;
    cfg.forest.n_trees = 60;
    // With a third of six columns per split, two splits in three would see
    // only noise; trying every column isolates the generator.
    cfg.forest.max_features = forest::MaxFeatures::all;
    const auto splits = make_splits(150, cfg);
    REQUIRE(splits.size() == 4);
    CHECK(splits[0].train.size() == 90);
    CHECK(splits[0].test.size() == 60);
    const auto rep = run_forest_task(TaskKind::life, m, life, splits, cfg);
    CHECK(rep.aggregate.at("test_mape").mean < 5.0);
    CHECK(rep.importance_top.front().first == "f2");
    CHECK(rep.cum_mae.size() == 60);

    const auto again = run_forest_task(TaskKind::life, m, life, splits, cfg);
    CHECK(again.to_json() == rep.to_json());
    const auto back = EvalReport::from_json(rep.to_json());
    CHECK(back.to_json() == rep.to_json());

    const auto& p = rep.seeds[0].test_pred;
    std::vector<double> perfect;
    for (auto i : rep.seeds[0].test) {
        perfect.push_back(life[i]);
    }
    CHECK(regression_metrics(perfect, perfect).rmse == 0.0);
    CHECK(p.size() == perfect.size());
}

TEST_CASE("knee-style classification on a thresholded feature") {
    std::vector<double> x0;
    const auto m = synthetic_matrix(60, 8, x0);
    std::vector<double> y;
    std::vector<int> strata;
    for (double v : x0) {
        y.push_back(v > 0.5 ? 1.0 : 0.0);
        strata.push_back(v > 0.5 ? 1 : 0);
    }
    TaskConfig cfg;
    cfg.seeds = 4;
    cfg.forest.n_trees = 60;
    const auto splits = make_splits(60, cfg, strata);
    for (const auto& s : splits) {
        std::size_t pos = 0;
        for (auto i : s.test) {
            pos += static_cast<std::size_t>(strata[i]);
        }
        CHECK(pos > 0);
        CHECK(pos < s.test.size());
    }
    const auto rep = run_forest_task(TaskKind::knee, m, y, splits, cfg);
    CHECK(rep.aggregate.at("test_macro_auc").mean > 0.95);
    CHECK(rep.macro_auc > 0.95);
    CHECK(rep.class_names == std::vector<std::string>{"no_knee", "knee"});

    const auto dir = std::filesystem::temp_directory_path() / "batdeg_test_report";
    std::filesystem::remove_all(dir);
    rep.write(dir);
    CHECK(std::filesystem::exists(dir / "roc_knee.csv"));
    CHECK(EvalReport::read(dir).to_json() == rep.to_json());
    std::filesystem::remove_all(dir);
}

TEST_CASE("splits and labelling reconcile") {
    TaskConfig cfg;
    CHECK_THROWS_AS(make_splits(4, cfg), ValidationError);
    const auto a = make_splits(20, cfg);
    const auto b = make_splits(20, cfg);
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(a[s].train == b[s].train);
        CHECK(a[s].test == b[s].test);
        auto all = a[s].train;
        all.insert(all.end(), a[s].test.begin(), a[s].test.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(20);
        std::iota(expect.begin(), expect.end(), 0);
        CHECK(all == expect);
    }

    std::vector<cell::CellHistory> cells{fading_cell(0.01, 40), fading_cell(0.004, 120), fading_cell(0.0, 60)};
    cells[0].cell_id = "short";
    cells[1].cell_id = "ends";
    cells[2].cell_id = "flat";
    const auto t = label_cells(cells);
    CHECK(t.summary.total == 3);
    CHECK(t.summary.short_history == std::vector<std::string>{"short"});
    CHECK(t.summary.censored == std::vector<std::string>{"flat"});
    CHECK(t.summary.usable_life == 1);
    CHECK(t.summary.total == t.summary.short_history.size() + t.summary.censored.size() + t.summary.usable_life);
    const auto path = std::filesystem::temp_directory_path() / "batdeg_labels.csv";
    write_labels_csv(path, t);
    const auto back = read_labels_csv(path);
    CHECK(back.summary.usable_life == 1);
    CHECK(back.cells[1].life.cycles == t.cells[1].life.cycles);
    std::filesystem::remove(path);
}

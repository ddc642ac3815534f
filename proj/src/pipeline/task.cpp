#include "batdeg/pipeline/task.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"
#include "batdeg/pipeline/baseline.hpp"

namespace batdeg::pipeline {

namespace {

using json = nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::mt19937_64 split_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
    return std::mt19937_64(seq);
}

std::size_t train_count(std::size_t n, double fraction) {
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, n >= 2 ? 1 : 0, n >= 2 ? n - 1 : n);
}

template <typename T>
std::vector<T> pick(std::span<const T> v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(v[i]);
    }
    return out;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json nums(std::span<const double> v) {
    json a = json::array();
    for (double x : v) {
        a.push_back(num(x));
    }
    return a;
}

std::vector<double> nums_from(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) {
        out.push_back(num_from(x));
    }
    return out;
}

json metrics_json(const RegressionMetrics& m) {
    return {{"mape", num(m.mape)}, {"mae", num(m.mae)}, {"rmse", num(m.rmse)}};
}

RegressionMetrics metrics_from(const json& j) {
    return {num_from(j.at("mape")), num_from(j.at("mae")), num_from(j.at("rmse"))};
}

json roc_json(const std::vector<RocPoint>& c) {
    json a = json::array();
    for (const auto& p : c) {
        a.push_back({num(p.fpr), num(p.tpr), num(p.threshold)});
    }
    return a;
}

std::vector<RocPoint> roc_from(const json& j) {
    std::vector<RocPoint> out;
    for (const auto& p : j) {
        out.push_back({num_from(p.at(0)), num_from(p.at(1)),
                       p.at(2).is_null() ? std::numeric_limits<double>::infinity() : p.at(2).get<double>()});
    }
    return out;
}

void aggregate_into(EvalReport& rep, const std::string& key, const std::vector<double>& values) {
    std::vector<double> finite;
    for (double v : values) {
        if (!std::isnan(v)) {
            finite.push_back(v);
        }
    }
    rep.aggregate[key] = mean_sd(finite);
}

void finish_regression(EvalReport& rep) {
    std::vector<double> tr_mape, te_mape, tr_mae, te_mae, tr_rmse, te_rmse;
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    for (const auto& s : rep.seeds) {
        tr_mape.push_back(s.train_metrics.mape);
        te_mape.push_back(s.test_metrics.mape);
        tr_mae.push_back(s.train_metrics.mae);
        te_mae.push_back(s.test_metrics.mae);
        tr_rmse.push_back(s.train_metrics.rmse);
        te_rmse.push_back(s.test_metrics.rmse);
        shortest = std::min(shortest, s.test.size());
    }
    aggregate_into(rep, "train_mape", tr_mape);
    aggregate_into(rep, "test_mape", te_mape);
    aggregate_into(rep, "train_mae", tr_mae);
    aggregate_into(rep, "test_mae", te_mae);
    aggregate_into(rep, "train_rmse", tr_rmse);
    aggregate_into(rep, "test_rmse", te_rmse);

    // Cumulated MAE over the test cells in split order, averaged over seeds.
    // Cells without a prediction count as missing.
    rep.cum_mae.assign(rep.seeds.empty() ? 0 : shortest, 0.0);
    std::vector<std::size_t> counts(rep.cum_mae.size(), 0);
    for (const auto& s : rep.seeds) {
        std::vector<double> err;
        for (std::size_t k = 0; k < s.test.size(); ++k) {
            if (!std::isnan(s.test_pred[k])) {
                err.push_back(std::abs(s.test_pred[k] - rep.targets[s.test[k]]));
            }
        }
        const auto curve = cumulated_mae_curve(err);
        for (std::size_t k = 0; k < std::min(curve.size(), rep.cum_mae.size()); ++k) {
            rep.cum_mae[k] += curve[k];
            ++counts[k];
        }
    }
    for (std::size_t k = 0; k < rep.cum_mae.size(); ++k) {
        rep.cum_mae[k] = counts[k] ? rep.cum_mae[k] / static_cast<double>(counts[k]) : kNaN;
    }
}

std::string safe_file_part(const std::string& s) {
    std::string out;
    for (char c : s) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    return out;
}

} // namespace

std::string to_string(TaskKind t) {
    switch (t) {
    case TaskKind::life: return "life";
    case TaskKind::knee: return "knee";
    case TaskKind::pattern: return "pattern";
    }
    return "life";
}

TaskKind task_kind_from_string(const std::string& s) {
    for (auto t : {TaskKind::life, TaskKind::knee, TaskKind::pattern}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    throw ValidationError("unknown task '" + s + "' (expected life, knee or pattern)");
}

bool is_classification(TaskKind t) noexcept { return t != TaskKind::life; }

void TaskConfig::validate() const {
    if (seeds < 1) {
        throw ValidationError("seeds must be at least 1");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in (0, 1)");
    }
    forest.validate();
}

std::vector<Split> make_splits(std::size_t n, const TaskConfig& cfg, std::span<const int> strata) {
    cfg.validate();
    if (n < 5) {
        throw ValidationError("need at least 5 usable cells, got " + std::to_string(n));
    }
    if (!strata.empty() && strata.size() != n) {
        throw ValidationError("strata length does not match cell count");
    }
    std::vector<Split> out;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
        auto rng = split_rng(cfg.seed, s);
        Split sp;
        sp.seed = cfg.seed + s;
        if (strata.empty()) {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            const auto k = train_count(n, cfg.train_fraction);
            sp.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
            sp.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
        } else {
            std::map<int, std::vector<std::size_t>> by_class;
            for (std::size_t i = 0; i < n; ++i) {
                by_class[strata[i]].push_back(i);
            }
            for (auto& [cls, members] : by_class) {
                std::shuffle(members.begin(), members.end(), rng);
                const auto k = train_count(members.size(), cfg.train_fraction);
                sp.train.insert(sp.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
                sp.test.insert(sp.test.end(), members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
            }
            std::shuffle(sp.train.begin(), sp.train.end(), rng);
            std::shuffle(sp.test.begin(), sp.test.end(), rng);
        }
        out.push_back(std::move(sp));
    }
    return out;
}

EvalReport run_forest_task(TaskKind task, const features::FeatureMatrix& x, std::span<const double> y,
                           const std::vector<Split>& splits, const TaskConfig& cfg,
                           std::vector<std::string> class_names) {
    cfg.validate();
    x.validate();
    if (y.size() != x.values.rows()) {
        throw ValidationError("label count " + std::to_string(y.size()) + " does not match " +
                              std::to_string(x.values.rows()) + " feature rows");
    }
    EvalReport rep;
    rep.task = to_string(task);
    rep.method = "forest";
    rep.cell_ids = x.cell_ids;
    rep.targets.assign(y.begin(), y.end());
    const bool classify = is_classification(task);
    std::size_t n_classes = 0;
    if (classify) {
        for (double v : y) {
            n_classes = std::max(n_classes, static_cast<std::size_t>(std::max(0.0, v)) + 1);
        }
        if (class_names.empty()) {
            for (std::size_t c = 0; c < n_classes; ++c) {
                class_names.push_back(task == TaskKind::knee ? (c == 0 ? "no_knee" : "knee")
                                                             : "pattern_" + std::to_string(c + 1));
            }
        }
        if (class_names.size() < n_classes) {
            throw ValidationError("fewer class names than classes");
        }
        n_classes = class_names.size();
        rep.class_names = class_names;
    }

    std::vector<double> imp_sum(x.values.cols(), 0.0);
    std::vector<std::vector<double>> pooled_scores(n_classes);
    std::vector<int> pooled_labels;

    for (const auto& sp : splits) {
        auto fc = cfg.forest;
        fc.seed = sp.seed;
        fc.task = classify ? forest::Task::classification : forest::Task::regression;
        const auto xtr = x.values.select_rows(sp.train);
        const auto xte = x.values.select_rows(sp.test);
        const auto ytr = pick(y, sp.train);
        const auto yte = pick(y, sp.test);
        const auto model = forest::RandomForest::fit(xtr, ytr, fc);
        const auto imp = model.importances();
        for (std::size_t j = 0; j < imp.size(); ++j) {
            imp_sum[j] += imp[j];
        }

        SeedResult sr;
        sr.seed = sp.seed;
        sr.train = sp.train;
        sr.test = sp.test;
        if (!classify) {
            const auto ptr = model.predict(xtr);
            sr.test_pred = model.predict(xte);
            const auto ids_tr = pick(std::span<const std::string>(x.cell_ids), sp.train);
            const auto ids_te = pick(std::span<const std::string>(x.cell_ids), sp.test);
            sr.train_metrics = regression_metrics(ytr, ptr, ids_tr);
            sr.test_metrics = regression_metrics(yte, sr.test_pred, ids_te);
        } else {
            auto to_int = [](const std::vector<double>& v) {
                std::vector<int> out;
                for (double d : v) {
                    out.push_back(static_cast<int>(d));
                }
                return out;
            };
            const auto ltr = to_int(ytr);
            const auto lte = to_int(yte);
            sr.train_accuracy = accuracy(ltr, model.predict_class(xtr));
            const auto cls = model.predict_class(xte);
            sr.test_accuracy = accuracy(lte, cls);
            sr.test_pred.assign(cls.begin(), cls.end());
            // Classes missing from this training split get probability 0.
            const auto raw = model.predict_proba(xte);
            sr.test_proba = Matrix(xte.rows(), n_classes, 0.0);
            for (std::size_t r = 0; r < raw.rows(); ++r) {
                for (std::size_t c = 0; c < raw.cols(); ++c) {
                    sr.test_proba(r, c) = raw(r, c);
                }
            }
            const auto ovr = one_vs_rest(sr.test_proba, lte);
            sr.test_auc = ovr.auc;
            sr.test_macro_auc = ovr.macro_auc;
            for (std::size_t r = 0; r < sr.test_proba.rows(); ++r) {
                for (std::size_t c = 0; c < n_classes; ++c) {
                    pooled_scores[c].push_back(sr.test_proba(r, c));
                }
                pooled_labels.push_back(lte[r]);
            }
        }
        rep.seeds.push_back(std::move(sr));
    }

    if (!classify) {
        finish_regression(rep);
    } else {
        std::vector<double> tr_acc, te_acc, macro;
        for (const auto& s : rep.seeds) {
            tr_acc.push_back(s.train_accuracy);
            te_acc.push_back(s.test_accuracy);
            macro.push_back(s.test_macro_auc);
        }
        aggregate_into(rep, "train_accuracy", tr_acc);
        aggregate_into(rep, "test_accuracy", te_acc);
        aggregate_into(rep, "test_macro_auc", macro);
        for (std::size_t c = 0; c < n_classes; ++c) {
            std::vector<double> per;
            for (const auto& s : rep.seeds) {
                per.push_back(s.test_auc[c]);
            }
            aggregate_into(rep, "test_auc_" + class_names[c], per);
        }
        Matrix pooled(pooled_labels.size(), n_classes);
        for (std::size_t r = 0; r < pooled_labels.size(); ++r) {
            for (std::size_t c = 0; c < n_classes; ++c) {
                pooled(r, c) = pooled_scores[c][r];
            }
        }
        const auto ovr = one_vs_rest(pooled, pooled_labels);
        rep.roc = ovr.curves;
        rep.roc_auc = ovr.auc;
        rep.macro_auc = ovr.macro_auc;
    }

    const double total = std::accumulate(imp_sum.begin(), imp_sum.end(), 0.0);
    std::vector<std::size_t> order(imp_sum.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return imp_sum[a] > imp_sum[b]; });
    for (std::size_t k = 0; k < std::min(cfg.importance_top, order.size()); ++k) {
        rep.importance_top.emplace_back(x.names[order[k]], total > 0 ? imp_sum[order[k]] / total : 0.0);
    }
    return rep;
}

EvalReport run_variance_baseline(std::span<const std::string> cell_ids, std::span<const double> variance,
                                 std::span<const double> life, const std::vector<Split>& splits) {
    if (cell_ids.size() != variance.size() || variance.size() != life.size()) {
        throw ValidationError("baseline inputs differ in length");
    }
    EvalReport rep;
    rep.task = "life";
    rep.method = "variance_baseline";
    rep.cell_ids.assign(cell_ids.begin(), cell_ids.end());
    rep.targets.assign(life.begin(), life.end());
    for (const auto& sp : splits) {
        const auto scores = baseline_variance_model(pick(variance, sp.train), pick(life, sp.train),
                                                    pick(variance, sp.test), pick(life, sp.test));
        SeedResult sr;
        sr.seed = sp.seed;
        sr.train = sp.train;
        sr.test = sp.test;
        sr.train_metrics = scores.train;
        sr.test_metrics = scores.test;
        sr.test_pred = scores.test_pred;
        rep.seeds.push_back(std::move(sr));
    }
    finish_regression(rep);
    return rep;
}

std::string EvalReport::to_json() const {
    json seeds_j = json::array();
    for (const auto& s : seeds) {
        json j = {{"seed", s.seed}, {"train", s.train}, {"test", s.test}, {"test_pred", nums(s.test_pred)}};
        if (task == "life") {
            j["train_metrics"] = metrics_json(s.train_metrics);
            j["test_metrics"] = metrics_json(s.test_metrics);
        } else {
            j["train_accuracy"] = num(s.train_accuracy);
            j["test_accuracy"] = num(s.test_accuracy);
            j["test_auc"] = nums(s.test_auc);
            j["test_macro_auc"] = num(s.test_macro_auc);
            json proba = json::array();
            for (std::size_t r = 0; r < s.test_proba.rows(); ++r) {
                proba.push_back(nums(s.test_proba.row(r)));
            }
            j["test_proba"] = proba;
        }
        seeds_j.push_back(j);
    }
    json agg = json::object();
    for (const auto& [k, v] : aggregate) {
        agg[k] = {{"mean", num(v.mean)}, {"sd", num(v.sd)}};
    }
    json roc_j = json::array();
    for (const auto& c : roc) {
        roc_j.push_back(roc_json(c));
    }
    json imp = json::array();
    for (const auto& [name, score] : importance_top) {
        imp.push_back({{"feature", name}, {"score", num(score)}});
    }
    json j = {{"version", 1},
              {"task", task},
              {"method", method},
              {"cell_ids", cell_ids},
              {"targets", nums(targets)},
              {"class_names", class_names},
              {"seeds", seeds_j},
              {"aggregate", agg},
              {"cum_mae", nums(cum_mae)},
              {"roc", roc_j},
              {"roc_auc", nums(roc_auc)},
              {"macro_auc", num(macro_auc)},
              {"importance_top", imp}};
    return j.dump(1);
}

EvalReport EvalReport::from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        if (j.at("version").get<int>() != 1) {
            throw ValidationError("unsupported report version");
        }
        EvalReport r;
        r.task = j.at("task").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.cell_ids = j.at("cell_ids").get<std::vector<std::string>>();
        r.targets = nums_from(j.at("targets"));
        r.class_names = j.at("class_names").get<std::vector<std::string>>();
        for (const auto& s : j.at("seeds")) {
            SeedResult sr;
            sr.seed = s.at("seed").get<std::uint64_t>();
            sr.train = s.at("train").get<std::vector<std::size_t>>();
            sr.test = s.at("test").get<std::vector<std::size_t>>();
            sr.test_pred = nums_from(s.at("test_pred"));
            if (s.contains("train_metrics")) {
                sr.train_metrics = metrics_from(s.at("train_metrics"));
                sr.test_metrics = metrics_from(s.at("test_metrics"));
            } else {
                sr.train_accuracy = num_from(s.at("train_accuracy"));
                sr.test_accuracy = num_from(s.at("test_accuracy"));
                sr.test_auc = nums_from(s.at("test_auc"));
                sr.test_macro_auc = num_from(s.at("test_macro_auc"));
                const auto& p = s.at("test_proba");
                sr.test_proba = Matrix(p.size(), r.class_names.size());
                for (std::size_t row = 0; row < p.size(); ++row) {
                    const auto v = nums_from(p[row]);
                    std::copy(v.begin(), v.end(), sr.test_proba.row(row).begin());
                }
            }
            r.seeds.push_back(std::move(sr));
        }
        for (const auto& [k, v] : j.at("aggregate").items()) {
            r.aggregate[k] = {num_from(v.at("mean")), num_from(v.at("sd"))};
        }
        r.cum_mae = nums_from(j.at("cum_mae"));
        for (const auto& c : j.at("roc")) {
            r.roc.push_back(roc_from(c));
        }
        r.roc_auc = nums_from(j.at("roc_auc"));
        r.macro_auc = num_from(j.at("macro_auc"));
        for (const auto& i : j.at("importance_top")) {
            r.importance_top.emplace_back(i.at("feature").get<std::string>(), num_from(i.at("score")));
        }
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
}

void EvalReport::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    io::write_file_atomic(dir / "report.json", to_json());
    if (!cum_mae.empty()) {
        std::string csv = "cells,cum_mae\n";
        for (std::size_t k = 0; k < cum_mae.size(); ++k) {
            csv += std::to_string(k + 1) + "," + io::format_double(cum_mae[k]) + "\n";
        }
        io::write_file_atomic(dir / "cum_mae.csv", csv);
    }
    for (std::size_t c = 0; c < roc.size(); ++c) {
        if (roc[c].empty()) {
            continue;
        }
        std::string csv = "fpr,tpr,threshold\n";
        for (const auto& p : roc[c]) {
            csv += io::format_double(p.fpr) + "," + io::format_double(p.tpr) + "," + io::format_double(p.threshold) +
                   "\n";
        }
        io::write_file_atomic(dir / ("roc_" + safe_file_part(class_names[c]) + ".csv"), csv);
    }
}

EvalReport EvalReport::read(const std::filesystem::path& dir) {
    return from_json(io::read_file(dir / "report.json"));
}

LabelTable label_cells(std::span<const cell::CellHistory> histories, const LifeLabelConfig& life,
                       const KneeConfig& knee) {
    life.validate();
    knee.validate();
    LabelTable t;
    t.summary.total = histories.size();
    for (const auto& h : histories) {
        CellLabel l;
        l.cell_id = h.cell_id;
        l.cycles = h.cycles.size();
        l.short_history = l.cycles < life.min_cycles || l.cycles < life.nominal_window;
        if (l.short_history) {
            t.summary.short_history.push_back(h.cell_id);
        } else {
            l.life = cycle_life(h, life);
            if (l.life.censored) {
                t.summary.censored.push_back(h.cell_id);
            } else {
                ++t.summary.usable_life;
            }
        }
        if (l.cycles >= 2 * knee.interval && !l.short_history) {
            l.knee = knee_label(h, knee);
            ++t.summary.usable_knee;
        }
        t.cells.push_back(std::move(l));
    }
    return t;
}

void write_labels_csv(const std::filesystem::path& path, const LabelTable& table) {
    std::string csv = "cell_id,cycles,short_history,censored,life,knee,knee_score\n";
    for (const auto& c : table.cells) {
        csv += c.cell_id + "," + std::to_string(c.cycles) + "," + (c.short_history ? "1" : "0") + "," +
               (c.life.censored ? "1" : "0") + "," + std::to_string(c.life.cycles) + ",";
        if (c.knee) {
            csv += std::string(c.knee->knee ? "1" : "0") + "," + io::format_double(c.knee->score);
        } else {
            csv += ",";
        }
        csv += "\n";
    }
    io::write_file_atomic(path, csv);
}

LabelTable read_labels_csv(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    std::string line;
    std::getline(in, line);
    if (line != "cell_id,cycles,short_history,censored,life,knee,knee_score") {
        throw ValidationError(path.string() + ": unexpected label header");
    }
    LabelTable t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = io::split_csv_line(line);
        const auto where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != 7) {
            throw ValidationError(where + ": expected 7 fields");
        }
        CellLabel c;
        c.cell_id = f[0];
        c.cycles = static_cast<std::size_t>(io::parse_double(f[1], where));
        c.short_history = f[2] == "1";
        c.life.censored = f[3] == "1";
        c.life.cycles = static_cast<std::size_t>(io::parse_double(f[4], where));
        if (!f[5].empty()) {
            KneeResult k;
            k.knee = f[5] == "1";
            k.score = io::parse_double(f[6], where);
            c.knee = k;
        }
        ++t.summary.total;
        if (c.short_history) {
            t.summary.short_history.push_back(c.cell_id);
        } else if (c.life.censored) {
            t.summary.censored.push_back(c.cell_id);
        } else {
            ++t.summary.usable_life;
        }
        t.summary.usable_knee += c.knee ? 1 : 0;
        t.cells.push_back(std::move(c));
    }
    return t;
}

} // namespace batdeg::pipeline

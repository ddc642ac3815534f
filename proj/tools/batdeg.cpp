// batdeg: command-line driver for the protocol, simulation, feature,
// training, clustering and scheduling stages.
//
// Exit codes: 0 success, 1 validation error (bad config, flags or inputs),
// 2 runtime error (I/O or internal failure).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "batdeg/cell/fleet.hpp"
#include "batdeg/cell/io.hpp"
#include "batdeg/config/config.hpp"
#include "batdeg/error.hpp"
#include "batdeg/features/evaluate.hpp"
#include "batdeg/features/plan.hpp"
#include "batdeg/forest/forest.hpp"
#include "batdeg/io/file.hpp"
#include "batdeg/pipeline/baseline.hpp"
#include "batdeg/pipeline/report.hpp"
#include "batdeg/pipeline/task.hpp"
#include "batdeg/pipeline/xps.hpp"
#include "batdeg/protocol/io.hpp"
#include "batdeg/scheduler/scheduler.hpp"

namespace fs = std::filesystem;
using namespace batdeg;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "run configuration file");
    sub->add_option("--seed", c.seed, "seed for this stage (overrides the config)");
    sub->add_option("--jobs", c.jobs, "worker thread cap")->check(CLI::PositiveNumber);
}

void require_exists(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) {
        throw ValidationError(what + " not found: " + p.string());
    }
}

/// File (or defaults), environment path overrides, stage overrides, validation.
/// The resolved config goes to stderr so stdout stays the stage output.
config::RunConfig resolve(const Common& c, const std::function<void(config::RunConfig&)>& apply = {}) {
    config::RunConfig cfg;
    if (!c.config.empty()) {
        require_exists(c.config, "config");
        cfg = config::parse_config(io::read_file(c.config), c.config);
    }
    config::apply_env_overrides(cfg);
    if (apply) {
        apply(cfg);
    }
    cfg.validate();
    std::cerr << "# resolved config\n" << cfg.to_text() << "\n";
    return cfg;
}

protocol::GaussianHmm protocol_model(const config::RunConfig& cfg, const std::string& model_path) {
    if (!model_path.empty()) {
        require_exists(model_path, "protocol model");
        try {
            return protocol::hmm_from_json(nlohmann::json::parse(io::read_file(model_path)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(model_path + ": " + e.what());
        }
    }
    const auto& p = cfg.protocol;
    return protocol::default_protocol_model(p.seed, p.n_states, p.trace_s, p.pack_cells);
}

std::vector<cell::CellHistory> load_dataset(const fs::path& dir, const std::set<std::string>& only = {}) {
    require_exists(dir / "fleet.json", "dataset manifest");
    std::vector<cell::CellHistory> out;
    for (const auto& e : cell::read_manifest(dir)) {
        if (only.empty() || only.count(e.cell_id) != 0) {
            out.push_back(cell::load_cell(dir, e));
        }
    }
    return out;
}

// ---- gen-protocol -----------------------------------------------------------

int cmd_gen_protocol(const Common& c, std::size_t count, std::size_t channels, const std::string& out_opt) {
    const auto cfg = resolve(c, [&](config::RunConfig& r) {
        if (c.seed) {
            r.protocol.seed = *c.seed;
        }
        if (count == 0) {
            throw ValidationError("--count must be at least 1");
        }
    });
    const fs::path out = out_opt.empty() ? fs::path(cfg.paths.protocols) : fs::path(out_opt);
    fs::create_directories(out);
    const auto model = protocol::default_protocol_model(cfg.protocol.seed, cfg.protocol.n_states,
                                                        cfg.protocol.trace_s, cfg.protocol.pack_cells);
    io::write_file_atomic(out / "hmm.json", protocol::to_json(model).dump(1) + "\n");
    const auto opts = cfg.fleet_config().protocol;
    for (std::size_t i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "p%04zu", i);
        auto spec = protocol::generate_protocol(model, opts, cfg.protocol.seed * 1000003ULL + i, id);
        spec.cycles = cfg.protocol.cycles_per_spec;
        fs::path dir = out;
        if (channels > 0) {
            char ch[32];
            std::snprintf(ch, sizeof ch, "ch%02zu", i % channels);
            dir /= ch;
            fs::create_directories(dir);
        }
        protocol::write_protocol(dir / (std::string(id) + ".json"), spec);
        std::printf("%s  %zu steps  %.0f s  -> %s\n", id, spec.steps.size(), spec.total_duration_s(),
                    (dir / (std::string(id) + ".json")).c_str());
    }
    return 0;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const Common& c, std::optional<std::size_t> cells, const std::string& out_opt,
                 const std::string& model_path) {
    const auto cfg = resolve(c, [&](config::RunConfig& r) {
        if (cells) {
            r.fleet.cells = *cells;
        }
        if (c.seed) {
            r.fleet.seed = *c.seed;
        }
    });
    const fs::path out = out_opt.empty() ? fs::path(cfg.paths.data) : fs::path(out_opt);
    const auto fleet = cfg.fleet_config();
    const auto model = protocol_model(cfg, model_path);
    const auto histories = cell::simulate_fleet(fleet, model, c.jobs);
    fs::create_directories(out);
    std::vector<cell::DatasetEntry> entries;
    for (std::size_t i = 0; i < histories.size(); ++i) {
        const auto& h = histories[i];
        cell::write_history_jsonl(out / (h.cell_id + ".jsonl"), h);
        entries.push_back({h.cell_id, h.params, h.end_reason, cell::make_cell(fleet, i).has_knee});
        std::printf("%s  T=%g C  cycles=%zu  end=%s\n", h.cell_id.c_str(), h.params.temperature, h.cycles.size(),
                    cell::to_string(h.end_reason).c_str());
    }
    cell::write_manifest(out, entries);
    std::printf("wrote %zu cells to %s\n", histories.size(), out.c_str());
    return 0;
}

// ---- featurize --------------------------------------------------------------

int cmd_featurize(const Common& c, const std::string& data_opt, const std::string& out_opt,
                  const std::string& list_path) {
    const auto cfg = resolve(c);
    const fs::path data = data_opt.empty() ? fs::path(cfg.paths.data) : fs::path(data_opt);
    const fs::path out = out_opt.empty() ? fs::path(cfg.paths.features) : fs::path(out_opt);
    std::vector<features::FeatureExpr> exprs;
    if (!list_path.empty()) {
        require_exists(list_path, "feature list");
        exprs = features::read_feature_list(list_path);
    } else {
        exprs = features::enumerate_space(cfg.space());
    }
    const auto histories = load_dataset(data);
    const auto plan = features::compile(exprs);
    const auto m = features::evaluate_matrix(plan, histories, static_cast<std::size_t>(cfg.features.early_cycles),
                                             cfg.resample(), c.jobs);
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    features::write_feature_csv(out, m);
    std::printf("wrote %zu cells x %zu features to %s\n", m.cell_ids.size(), m.names.size(), out.c_str());
    return 0;
}

// ---- label ------------------------------------------------------------------

int cmd_label(const Common& c, const std::string& data_opt, const std::string& out_opt) {
    const auto cfg = resolve(c);
    const fs::path data = data_opt.empty() ? fs::path(cfg.paths.data) : fs::path(data_opt);
    const fs::path out = out_opt.empty() ? fs::path(cfg.paths.labels) : fs::path(out_opt);
    const auto histories = load_dataset(data);
    const auto table = pipeline::label_cells(histories, cfg.life_labels(), cfg.knee_labels());
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    pipeline::write_labels_csv(out, table);
    std::size_t knees = 0;
    for (const auto& l : table.cells) {
        knees += l.knee && l.knee->knee;
    }
    std::printf("cells %zu  usable life %zu  usable knee %zu  knees %zu  short %zu  censored %zu\n",
                table.summary.total, table.summary.usable_life, table.summary.usable_knee, knees,
                table.summary.short_history.size(), table.summary.censored.size());
    for (const auto& id : table.summary.short_history) {
        std::printf("short history: %s\n", id.c_str());
    }
    for (const auto& id : table.summary.censored) {
        std::printf("censored: %s\n", id.c_str());
    }
    return 0;
}

// ---- task assembly ----------------------------------------------------------

struct TaskData {
    pipeline::TaskKind kind;
    features::FeatureMatrix x;
    std::vector<double> y;
    std::vector<int> strata; ///< classification only
    std::vector<std::string> class_names;
};

std::map<std::string, std::string> read_patterns_csv(const fs::path& path) {
    require_exists(path, "pattern table");
    const auto text = io::read_file(path);
    std::map<std::string, std::string> out;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string line = text.substr(start, end - start);
        start = end + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto f = io::split_csv_line(line);
        if (lineno == 1) {
            if (f.size() < 2 || f[0] != "cell_id" || f[1] != "pattern") {
                throw ValidationError(path.string() + ": header must start with cell_id,pattern");
            }
            continue;
        }
        if (f.size() < 2 || f[0].empty() || f[1].empty()) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected cell_id,pattern");
        }
        if (!out.emplace(f[0], f[1]).second) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": duplicate cell " + f[0]);
        }
    }
    return out;
}

TaskData assemble(pipeline::TaskKind kind, const config::RunConfig& cfg, const std::string& features_opt,
                  const std::string& labels_opt) {
    const fs::path fpath = features_opt.empty() ? fs::path(cfg.paths.features) : fs::path(features_opt);
    const fs::path lpath = labels_opt.empty() ? fs::path(cfg.paths.labels) : fs::path(labels_opt);
    require_exists(fpath, "feature matrix");
    const auto all = features::read_feature_csv(fpath);
    TaskData d{kind, {}, {}, {}, {}};
    std::vector<std::size_t> rows;

    if (kind == pipeline::TaskKind::pattern) {
        if (cfg.paths.patterns.empty()) {
            throw ValidationError("the pattern task needs paths.patterns (cell_id,pattern CSV)");
        }
        const auto pats = read_patterns_csv(cfg.paths.patterns);
        std::set<std::string> names;
        for (const auto& [id, p] : pats) {
            names.insert(p);
        }
        d.class_names.assign(names.begin(), names.end());
        for (std::size_t i = 0; i < all.cell_ids.size(); ++i) {
            const auto it = pats.find(all.cell_ids[i]);
            if (it == pats.end()) {
                continue;
            }
            const auto cls = std::find(d.class_names.begin(), d.class_names.end(), it->second) - d.class_names.begin();
            rows.push_back(i);
            d.y.push_back(static_cast<double>(cls));
        }
    } else {
        require_exists(lpath, "label table");
        const auto table = pipeline::read_labels_csv(lpath);
        std::map<std::string, const pipeline::CellLabel*> by_id;
        for (const auto& l : table.cells) {
            by_id[l.cell_id] = &l;
        }
        if (kind == pipeline::TaskKind::knee) {
            d.class_names = {"no_knee", "knee"};
        }
        for (std::size_t i = 0; i < all.cell_ids.size(); ++i) {
            const auto it = by_id.find(all.cell_ids[i]);
            if (it == by_id.end()) {
                throw ValidationError("cell " + all.cell_ids[i] + " has no row in " + lpath.string());
            }
            const auto& l = *it->second;
            if (l.short_history) {
                continue;
            }
            if (kind == pipeline::TaskKind::life && !l.life.censored) {
                rows.push_back(i);
                d.y.push_back(static_cast<double>(l.life.cycles));
            } else if (kind == pipeline::TaskKind::knee && l.knee) {
                rows.push_back(i);
                d.y.push_back(l.knee->knee ? 1.0 : 0.0);
            }
        }
    }
    if (rows.size() < 5) {
        throw ValidationError("only " + std::to_string(rows.size()) + " usable cells for the " +
                              pipeline::to_string(kind) + " task; at least 5 are needed");
    }
    for (std::size_t i : rows) {
        d.x.cell_ids.push_back(all.cell_ids[i]);
    }
    d.x.names = all.names;
    d.x.values = all.values.select_rows(rows);
    if (pipeline::is_classification(kind)) {
        d.strata.assign(d.y.begin(), d.y.end());
    }
    return d;
}

pipeline::TaskConfig task_config(const config::RunConfig& cfg, pipeline::TaskKind kind, std::size_t jobs) {
    auto tc = cfg.task_config();
    tc.forest.task = pipeline::is_classification(kind) ? forest::Task::classification : forest::Task::regression;
    tc.forest.jobs = jobs;
    return tc;
}

void apply_task_seed(const Common& c, config::RunConfig& r) {
    if (c.seed) {
        r.tasks.seed = *c.seed;
    }
}

// ---- train ------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& task, const std::string& features_opt,
              const std::string& labels_opt, const std::string& out_opt) {
    const auto cfg = resolve(c, [&](config::RunConfig& r) { apply_task_seed(c, r); });
    const auto kind = pipeline::task_kind_from_string(task);
    const auto d = assemble(kind, cfg, features_opt, labels_opt);
    const auto tc = task_config(cfg, kind, c.jobs);
    const auto model = forest::RandomForest::fit(d.x.values, d.y, tc.forest);
    const fs::path out = out_opt.empty() ? fs::path(cfg.paths.models) / (task + ".json") : fs::path(out_opt);
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    model.save(out.string());
    const auto imp = model.importance_report(d.x.names).to_text(cfg.tasks.importance_top);
    auto imp_path = out;
    imp_path.replace_extension(".importance.txt");
    io::write_file_atomic(imp_path, imp);
    std::printf("trained %s forest on %zu cells x %zu features -> %s\n", task.c_str(), d.x.cell_ids.size(),
                d.x.names.size(), out.c_str());
    std::fputs(imp.c_str(), stdout);
    return 0;
}

// ---- evaluate ---------------------------------------------------------------

int cmd_evaluate(const Common& c, const std::string& task, const std::string& method,
                 const std::string& features_opt, const std::string& labels_opt, const std::string& data_opt,
                 const std::string& out_opt) {
    const auto cfg = resolve(c, [&](config::RunConfig& r) { apply_task_seed(c, r); });
    const auto kind = pipeline::task_kind_from_string(task);
    if (method != "forest" && method != "baseline") {
        throw ValidationError("unknown method '" + method + "' (forest, baseline)");
    }
    if (method == "baseline" && kind != pipeline::TaskKind::life) {
        throw ValidationError("the baseline method applies to the life task only");
    }
    const auto d = assemble(kind, cfg, features_opt, labels_opt);
    const auto tc = task_config(cfg, kind, c.jobs);
    const auto splits = pipeline::make_splits(d.y.size(), tc, d.strata);
    pipeline::EvalReport rep;
    if (method == "forest") {
        rep = pipeline::run_forest_task(kind, d.x, d.y, splits, tc, d.class_names);
    } else {
        const fs::path data = data_opt.empty() ? fs::path(cfg.paths.data) : fs::path(data_opt);
        const std::set<std::string> ids(d.x.cell_ids.begin(), d.x.cell_ids.end());
        const auto histories = load_dataset(data, ids);
        std::map<std::string, double> var_by_id;
        const auto last = static_cast<std::size_t>(cfg.features.early_cycles);
        for (const auto& h : histories) {
            var_by_id[h.cell_id] = pipeline::delta_q_variance(h, 10, last, cfg.resample());
        }
        std::vector<double> var;
        for (const auto& id : d.x.cell_ids) {
            const auto it = var_by_id.find(id);
            if (it == var_by_id.end()) {
                throw ValidationError("cell " + id + " is missing from dataset " + data.string());
            }
            var.push_back(it->second);
        }
        rep = pipeline::run_variance_baseline(d.x.cell_ids, var, d.y, splits);
    }
    const fs::path out = out_opt.empty() ? fs::path(cfg.paths.reports) / (task + "-" + method) : fs::path(out_opt);
    rep.write(out);
    std::printf("%s / %s over %zu seeds, %zu cells -> %s\n", task.c_str(), method.c_str(), rep.seeds.size(),
                rep.cell_ids.size(), out.c_str());
    for (const auto& [k, v] : rep.aggregate) {
        std::printf("  %-16s %.6g +- %.6g\n", k.c_str(), v.mean, v.sd);
    }
    if (!rep.class_names.empty()) {
        std::printf("  %-16s %.6g\n", "macro_auc", rep.macro_auc);
    }
    return 0;
}

// ---- cluster-xps ------------------------------------------------------------

int cmd_cluster_xps(const Common& c, bool fixture, bool listed, const std::string& input, std::size_t k,
                    const std::string& out) {
    const auto cfg = resolve(c, [&](config::RunConfig& r) { apply_task_seed(c, r); });
    if (fixture == !input.empty()) {
        throw ValidationError("give exactly one of --fixture or --input");
    }
    const auto samples = fixture ? pipeline::xps_fixture() : pipeline::read_xps_csv(input);
    const auto issues = pipeline::xps_check(samples);
    for (const auto& i : issues) {
        std::printf("check %s %s: expected %.6g, got %.6g\n", i.data_tag.c_str(), i.check.c_str(), i.expected,
                    i.actual);
    }
    pipeline::XpsPatterns pats;
    if (listed) {
        pats = pipeline::xps_listed_patterns(samples);
    } else {
        pipeline::XpsPatternOptions opt;
        opt.k = k;
        opt.seed = cfg.tasks.seed;
        if (fixture) {
            opt.reference = pipeline::xps_fixture_centers();
        }
        pats = pipeline::xps_patterns(samples, opt);
        std::printf("k-means k=%zu inertia %.6g\n", k, pats.inertia);
    }
    for (const auto& p : pats.patterns) {
        std::printf("Pattern %d %-7s members %zu:", p.index, p.name.c_str(), p.members.size());
        for (std::size_t m : p.members) {
            std::printf(" %s", samples[m].data_tag.c_str());
        }
        std::printf("\n");
    }
    std::printf("retained %zu patterns, excluded %zu singleton%s:", pats.patterns.size(), pats.excluded.size(),
                pats.excluded.size() == 1 ? "" : "s");
    for (std::size_t e : pats.excluded) {
        std::printf(" %s", samples[e].data_tag.c_str());
    }
    std::printf("\n");
    if (!out.empty()) {
        std::string csv = "cell_id,pattern\n";
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (pats.pattern_of[i] > 0) {
                csv += samples[i].data_tag + "," + pats.patterns[pats.pattern_of[i] - 1].name + "\n";
            }
        }
        io::write_file_atomic(out, csv);
    }
    return 0;
}

// ---- schedule ---------------------------------------------------------------

struct ScheduleArgs {
    std::string queues;
    std::string dir;
    std::uint64_t poll = 1;
    std::uint64_t ticks_per_cycle = 1;
    std::vector<std::string> fail;
    bool resume = false;
    bool restart_inflight = false;
    std::uint64_t wall_ms = 0;
};

int cmd_schedule(const Common& c, const ScheduleArgs& a) {
    const auto cfg = resolve(c, [&](config::RunConfig&) {
        if (a.poll == 0 || a.ticks_per_cycle == 0) {
            throw ValidationError("--poll and --ticks-per-cycle must be positive");
        }
    });
    const fs::path qdir = a.queues.empty() ? fs::path(cfg.paths.protocols) : fs::path(a.queues);
    const fs::path dir = a.dir.empty() ? fs::path(cfg.paths.schedule) : fs::path(a.dir);
    const auto queues = scheduler::load_queues(qdir);
    if (queues.empty()) {
        throw ValidationError("no channel directories under " + qdir.string());
    }
    fs::create_directories(dir);
    scheduler::CampaignOptions opts;
    opts.poll_interval = a.poll;
    opts.checkpoint = dir / "checkpoint.json";
    opts.log = dir / "campaign.jsonl";
    opts.restart_inflight = a.restart_inflight;
    if (!a.resume) {
        fs::remove(opts.checkpoint);
        fs::remove(opts.log);
    }
    scheduler::VirtualCyclerOptions vopt;
    vopt.ticks_per_cycle = a.ticks_per_cycle;
    vopt.fail_specs.insert(a.fail.begin(), a.fail.end());

    scheduler::CampaignResult res;
    if (a.wall_ms > 0) {
        const scheduler::WallClock clock{std::chrono::milliseconds(a.wall_ms)};
        auto factory = [&](const std::string&) { return std::make_unique<scheduler::VirtualCycler>(clock, vopt); };
        std::optional<scheduler::Checkpoint> resume;
        if (a.resume && fs::exists(opts.checkpoint)) {
            resume = scheduler::read_checkpoint(opts.checkpoint);
        }
        res = scheduler::run_campaign_threaded(queues, clock, opts, factory, resume);
    } else {
        scheduler::SimClock clock;
        auto factory = [&](const std::string&) { return std::make_unique<scheduler::VirtualCycler>(clock, vopt); };
        res = a.resume ? scheduler::recover(queues, clock, opts, factory)
                       : scheduler::run_campaign(queues, clock, opts, factory);
    }
    const auto idle = scheduler::max_idle(res.log);
    for (const auto& ch : res.final_state.channels) {
        std::size_t done = 0;
        std::size_t failed = 0;
        for (const auto& s : ch.completed) {
            (s.status == scheduler::RunStatus::completed ? done : failed)++;
        }
        const auto it = idle.find(ch.channel);
        std::printf("%s  completed %zu  failed %zu  max idle %llu\n", ch.channel.c_str(), done, failed,
                    static_cast<unsigned long long>(it == idle.end() ? 0 : it->second));
    }
    std::uint64_t end = res.end_tick;
    for (const auto& s : res.log) {
        end = std::max(end, s.end_tick);
    }
    std::printf("campaign end tick %llu, %zu runs logged to %s\n", static_cast<unsigned long long>(end),
                res.log.size(), opts.log.c_str());
    return 0;
}

// ---- report -----------------------------------------------------------------

int cmd_report(const Common& c, const std::string& reports_opt, const std::string& out_opt) {
    const auto cfg = resolve(c);
    const fs::path dir = reports_opt.empty() ? fs::path(cfg.paths.reports) : fs::path(reports_opt);
    const fs::path out = out_opt.empty() ? dir : fs::path(out_opt);
    const auto reports = pipeline::collect_reports(dir);
    if (reports.empty()) {
        throw ValidationError("no report.json under " + dir.string());
    }
    pipeline::write_summary(reports, out);
    for (const auto& r : reports) {
        const auto& agg = r.report.aggregate;
        const auto mape = agg.find("test_mape");
        std::printf("%-24s %-8s %-8s", r.name.c_str(), r.report.task.c_str(), r.report.method.c_str());
        if (mape != agg.end()) {
            std::printf(" test MAPE %.4g +- %.4g", mape->second.mean, mape->second.sd);
        }
        if (!r.report.class_names.empty()) {
            std::printf(" macro AUC %.4g", r.report.macro_auc);
        }
        std::printf("\n");
    }
    std::printf("summary: %s\n", (out / "summary.json").c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"batdeg: battery degradation pipeline"};
    app.require_subcommand(1);

    Common common;
    int rc = 0;

    auto* gen = app.add_subcommand("gen-protocol", "fit the protocol HMM and write sampled protocols");
    add_common(gen, common);
    std::size_t gen_count = 8;
    std::size_t gen_channels = 0;
    std::string gen_out;
    gen->add_option("--count", gen_count, "number of protocols");
    gen->add_option("--channels", gen_channels, "spread protocols over this many channel subdirectories");
    gen->add_option("--out", gen_out, "output directory (default paths.protocols)");

    auto* sim = app.add_subcommand("simulate", "simulate the fleet and write a dataset directory");
    add_common(sim, common);
    std::optional<std::size_t> sim_cells;
    std::string sim_out;
    std::string sim_model;
    sim->add_option("--cells", sim_cells, "fleet size (overrides fleet.cells)");
    sim->add_option("--out", sim_out, "dataset directory (default paths.data)");
    sim->add_option("--model", sim_model, "protocol HMM JSON from gen-protocol");

    auto* feat = app.add_subcommand("featurize", "evaluate the feature space on a dataset");
    add_common(feat, common);
    std::string feat_data;
    std::string feat_out;
    std::string feat_list;
    feat->add_option("--data", feat_data, "dataset directory (default paths.data)");
    feat->add_option("--out", feat_out, "feature CSV (default paths.features)");
    feat->add_option("--list", feat_list, "feature name list instead of the full space");

    auto* lab = app.add_subcommand("label", "derive life and knee labels");
    add_common(lab, common);
    std::string lab_data;
    std::string lab_out;
    lab->add_option("--data", lab_data, "dataset directory (default paths.data)");
    lab->add_option("--out", lab_out, "label CSV (default paths.labels)");

    std::string task = "life";
    std::string features_in;
    std::string labels_in;

    auto* train = app.add_subcommand("train", "fit one forest on every usable cell");
    add_common(train, common);
    std::string train_out;
    train->add_option("--task", task, "life, knee or pattern");
    train->add_option("--features", features_in, "feature CSV (default paths.features)");
    train->add_option("--labels", labels_in, "label CSV (default paths.labels)");
    train->add_option("--out", train_out, "model JSON (default paths.models/<task>.json)");

    auto* eval = app.add_subcommand("evaluate", "repeated split evaluation; writes an EvalReport");
    add_common(eval, common);
    std::string method = "forest";
    std::string eval_data;
    std::string eval_out;
    eval->add_option("--task", task, "life, knee or pattern");
    eval->add_option("--method", method, "forest or baseline (dQ variance, life only)");
    eval->add_option("--features", features_in, "feature CSV (default paths.features)");
    eval->add_option("--labels", labels_in, "label CSV (default paths.labels)");
    eval->add_option("--data", eval_data, "dataset directory for the baseline (default paths.data)");
    eval->add_option("--out", eval_out, "report directory (default paths.reports/<task>-<method>)");

    auto* xps = app.add_subcommand("cluster-xps", "group XPS compositions into patterns");
    add_common(xps, common);
    bool xps_fixture = false;
    bool xps_listed = false;
    std::string xps_input;
    std::size_t xps_k = 8;
    std::string xps_out;
    xps->add_flag("--fixture", xps_fixture, "use the embedded composition table");
    xps->add_option("--input", xps_input, "composition CSV");
    xps->add_flag("--listed", xps_listed, "use the listed groups instead of k-means");
    xps->add_option("--k", xps_k, "clusters")->check(CLI::PositiveNumber);
    xps->add_option("--out", xps_out, "write cell_id,pattern CSV");

    auto* sched = app.add_subcommand("schedule", "run a channel campaign on virtual cyclers");
    add_common(sched, common);
    ScheduleArgs sargs;
    sched->add_option("--queues", sargs.queues, "one subdirectory of protocol JSON per channel");
    sched->add_option("--dir", sargs.dir, "checkpoint and log directory (default paths.schedule)");
    sched->add_option("--poll", sargs.poll, "poll interval in ticks");
    sched->add_option("--ticks-per-cycle", sargs.ticks_per_cycle, "virtual cycler speed");
    sched->add_option("--fail", sargs.fail, "spec ids the virtual cycler fails");
    sched->add_flag("--resume", sargs.resume, "recover from the existing checkpoint");
    sched->add_flag("--restart-inflight", sargs.restart_inflight, "rerun in-flight specs from their start");
    sched->add_option("--wall-ms", sargs.wall_ms, "threaded run with a wall clock of this tick length");

    auto* rep = app.add_subcommand("report", "collate EvalReports into summary.json and curve CSVs");
    add_common(rep, common);
    std::string rep_in;
    std::string rep_out;
    rep->add_option("--reports", rep_in, "directory of report subdirectories (default paths.reports)");
    rep->add_option("--out", rep_out, "output directory (default the reports directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) {
            rc = cmd_gen_protocol(common, gen_count, gen_channels, gen_out);
        } else if (*sim) {
            rc = cmd_simulate(common, sim_cells, sim_out, sim_model);
        } else if (*feat) {
            rc = cmd_featurize(common, feat_data, feat_out, feat_list);
        } else if (*lab) {
            rc = cmd_label(common, lab_data, lab_out);
        } else if (*train) {
            rc = cmd_train(common, task, features_in, labels_in, train_out);
        } else if (*eval) {
            rc = cmd_evaluate(common, task, method, features_in, labels_in, eval_data, eval_out);
        } else if (*xps) {
            rc = cmd_cluster_xps(common, xps_fixture, xps_listed, xps_input, xps_k, xps_out);
        } else if (*sched) {
            rc = cmd_schedule(common, sargs);
        } else if (*rep) {
            rc = cmd_report(common, rep_in, rep_out);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}

#include "batdeg/config/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "batdeg/error.hpp"
#include "batdeg/forest/forest.hpp"
#include "batdeg/io/file.hpp"

namespace batdeg::config {

namespace {

struct Value {
    enum class Kind { number, boolean, string, list } kind = Kind::number;
    std::string text; // raw number text or string contents
    bool flag = false;
    std::vector<double> list;
};

using Setter = std::function<void(const Value&)>;
using Getter = std::function<std::string()>;

struct Field {
    std::string key;
    Setter set;
    Getter get;
};

struct Section {
    std::string name;
    std::vector<Field> fields;
};

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

double as_double(const Value& v) {
    if (v.kind != Value::Kind::number) {
        fail("expected a number");
    }
    return io::parse_double(v.text, "number");
}

std::uint64_t as_u64(const Value& v) {
    if (v.kind != Value::Kind::number) {
        fail("expected a non-negative integer");
    }
    std::uint64_t out = 0;
    const char* b = v.text.data();
    const char* e = b + v.text.size();
    const auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || ptr != e) {
        fail("expected a non-negative integer, got '" + v.text + "'");
    }
    return out;
}

std::string as_string(const Value& v) {
    if (v.kind != Value::Kind::string) {
        fail("expected a quoted string");
    }
    return v.text;
}

std::vector<double> as_list(const Value& v) {
    if (v.kind != Value::Kind::list) {
        fail("expected a list like [1, 2]");
    }
    return v.list;
}

std::string fmt(double d) { return io::format_double(d); }
std::string fmt(std::uint64_t u) { return std::to_string(u); }
std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string fmt_list(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + fmt(v[i]);
    }
    return out + "]";
}

Field f_double(std::string key, double& ref) {
    return {std::move(key), [&ref](const Value& v) { ref = as_double(v); }, [&ref] { return fmt(ref); }};
}
Field f_size(std::string key, std::size_t& ref) {
    return {std::move(key), [&ref](const Value& v) { ref = static_cast<std::size_t>(as_u64(v)); },
            [&ref] { return fmt(static_cast<std::uint64_t>(ref)); }};
}
Field f_u64(std::string key, std::uint64_t& ref) {
    return {std::move(key), [&ref](const Value& v) { ref = as_u64(v); }, [&ref] { return fmt(ref); }};
}
Field f_int(std::string key, int& ref) {
    return {std::move(key),
            [&ref](const Value& v) {
                const auto u = as_u64(v);
                if (u > 1000000) {
                    fail("value too large");
                }
                ref = static_cast<int>(u);
            },
            [&ref] { return std::to_string(ref); }};
}
Field f_string(std::string key, std::string& ref) {
    return {std::move(key), [&ref](const Value& v) { ref = as_string(v); }, [&ref] { return quote(ref); }};
}
Field f_list(std::string key, std::vector<double>& ref) {
    return {std::move(key), [&ref](const Value& v) { ref = as_list(v); }, [&ref] { return fmt_list(ref); }};
}

// Field tables bind to a specific RunConfig instance.
std::vector<Section> sections(RunConfig& c) {
    auto& p = c.protocol;
    auto& f = c.fleet;
    auto& ft = c.features;
    auto& t = c.tasks;
    auto& ph = c.paths;
    return {
        {"protocol",
         {f_size("n_states", p.n_states), f_double("cap_w", p.cap_w), f_double("zero_keep_ratio", p.zero_keep_ratio),
          f_u64("seed", p.seed), f_double("duration_s", p.duration_s), f_double("step_s", p.step_s),
          f_double("trace_s", p.trace_s), f_double("pack_cells", p.pack_cells),
          f_size("cycles_per_spec", p.cycles_per_spec)}},
        {"fleet",
         {f_size("cells", f.cells), f_list("temperatures", f.temperatures), f_u64("seed", f.seed),
          f_double("knee_fraction", f.knee_fraction), f_double("knee_at_min", f.knee_at_min),
          f_double("knee_at_max", f.knee_at_max), f_size("knee_cycle_floor", f.knee_cycle_floor),
          f_double("knee_fade_multiplier", f.knee_fade_multiplier), f_double("knee_r_growth", f.knee_r_growth),
          f_double("fade_spread", f.fade_spread), f_double("rated_capacity", f.base.rated_capacity),
          f_double("r0", f.base.r0), f_double("r_growth", f.base.r_growth),
          f_double("fade_per_cycle", f.base.fade_per_cycle), f_double("low_temp_penalty", f.base.low_temp_penalty),
          f_double("high_temp_penalty", f.base.high_temp_penalty),
          f_double("cold_capacity_coeff", f.base.cold_capacity_coeff),
          f_double("cold_resistance_coeff", f.base.cold_resistance_coeff),
          f_double("manufacturing_spread", f.base.manufacturing_spread), f_size("max_cycles", f.life.max_cycles),
          f_double("dt", f.life.dt), f_size("record_every", f.life.record_every),
          f_size("detail_cycles", f.life.detail_cycles), f_double("stop_fraction", f.life.stop_fraction),
          f_double("charge_high_power", f.charge.high_power), f_double("charge_low_power", f.charge.low_power),
          f_double("charge_switch_voltage", f.charge.switch_voltage)}},
        {"features",
         {f_int("groups", ft.groups), f_int("segments", ft.segments), f_int("early_cycles", ft.early_cycles),
          f_size("grid_len", ft.grid_len)}},
        {"tasks",
         {f_size("seeds", t.seeds), f_u64("seed", t.seed), f_double("train_fraction", t.train_fraction),
          f_string("knee_mode", t.knee_mode), f_double("knee_threshold", t.knee_threshold),
          f_size("knee_interval", t.knee_interval), f_double("eol_fraction", t.eol_fraction),
          f_size("nominal_window", t.nominal_window), f_size("n_trees", t.n_trees),
          f_string("max_features", t.max_features), f_size("min_samples_leaf", t.min_samples_leaf),
          f_size("max_depth", t.max_depth), f_string("tie_break", t.tie_break),
          f_size("importance_top", t.importance_top)}},
        {"paths",
         {f_string("data", ph.data), f_string("protocols", ph.protocols), f_string("features", ph.features),
          f_string("labels", ph.labels), f_string("patterns", ph.patterns), f_string("models", ph.models),
          f_string("reports", ph.reports), f_string("schedule", ph.schedule)}},
    };
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') {
            in_str = !in_str;
        } else if (s[i] == '#' && !in_str) {
            return s.substr(0, i);
        }
    }
    return s;
}

Value parse_value(std::string_view raw) {
    const auto s = trim(raw);
    Value v;
    if (s.empty()) {
        fail("missing value");
    }
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"' || s.substr(1, s.size() - 2).find('"') != std::string_view::npos) {
            fail("unterminated or malformed string");
        }
        v.kind = Value::Kind::string;
        v.text = std::string(s.substr(1, s.size() - 2));
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = Value::Kind::boolean;
        v.flag = s == "true";
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']') {
            fail("unterminated list");
        }
        v.kind = Value::Kind::list;
        const auto inner = trim(s.substr(1, s.size() - 2));
        if (!inner.empty()) {
            for (const auto& item : io::split_csv_line(inner)) {
                v.list.push_back(io::parse_double(trim(item), "list element"));
            }
        }
        return v;
    }
    v.kind = Value::Kind::number;
    v.text = std::string(s);
    (void)io::parse_double(v.text, "number");
    return v;
}

void parse_into(RunConfig& cfg, std::string_view text, const std::string& source) {
    auto table = sections(cfg);
    Section* current = nullptr;
    std::map<std::string, std::size_t> seen;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const auto line = trim(strip_comment(text.substr(start, end - start)));
        start = end + 1;
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (line.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        try {
            if (line.front() == '[') {
                if (line.back() != ']') {
                    fail("malformed section header");
                }
                const std::string name(trim(line.substr(1, line.size() - 2)));
                const auto it = std::find_if(table.begin(), table.end(), [&](const Section& s) { return s.name == name; });
                if (it == table.end()) {
                    fail("unknown section [" + name + "]");
                }
                current = &*it;
            } else {
                const auto eq = line.find('=');
                if (eq == std::string_view::npos) {
                    fail("expected key = value");
                }
                const std::string key(trim(line.substr(0, eq)));
                if (current == nullptr) {
                    fail("key '" + key + "' outside a section");
                }
                const auto it = std::find_if(current->fields.begin(), current->fields.end(),
                                             [&](const Field& f) { return f.key == key; });
                if (it == current->fields.end()) {
                    fail("unknown key '" + key + "' in [" + current->name + "]");
                }
                const std::string full = current->name + "." + key;
                if (seen.count(full) != 0) {
                    fail("duplicate key '" + full + "' (first at line " + std::to_string(seen[full]) + ")");
                }
                seen[full] = lineno;
                try {
                    it->set(parse_value(line.substr(eq + 1)));
                } catch (const ValidationError& e) {
                    fail(full + ": " + e.what());
                }
            }
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (end == text.size()) {
            break;
        }
    }
}

} // namespace

RunConfig::RunConfig() {
    fleet.life.record_every = 5;
    fleet.life.detail_cycles = 50;
}

cell::FleetConfig RunConfig::fleet_config() const {
    auto f = fleet;
    f.protocol.cap_w = protocol.cap_w;
    f.protocol.zero_keep_ratio = protocol.zero_keep_ratio;
    f.protocol.duration_s = protocol.duration_s;
    f.protocol.step_s = protocol.step_s;
    return f;
}

features::SpaceConfig RunConfig::space() const {
    features::SpaceConfig s;
    s.groups = features.groups;
    s.segments = features.segments;
    s.early_cycles = features.early_cycles;
    return s;
}

features::ResampleOptions RunConfig::resample() const {
    features::ResampleOptions o;
    o.grid_len = features.grid_len;
    o.v_min = fleet.base.v_min;
    o.v_max = fleet.base.v_max;
    return o;
}

pipeline::LifeLabelConfig RunConfig::life_labels() const {
    pipeline::LifeLabelConfig l;
    l.eol_fraction = tasks.eol_fraction;
    l.nominal_window = tasks.nominal_window;
    l.early_window = static_cast<std::size_t>(features.early_cycles);
    l.min_cycles = static_cast<std::size_t>(features.early_cycles);
    return l;
}

pipeline::KneeConfig RunConfig::knee_labels() const {
    pipeline::KneeConfig k;
    k.interval = tasks.knee_interval;
    k.threshold = tasks.knee_threshold;
    k.mode = pipeline::knee_mode_from_string(tasks.knee_mode);
    return k;
}

pipeline::TaskConfig RunConfig::task_config() const {
    pipeline::TaskConfig t;
    t.seeds = tasks.seeds;
    t.seed = tasks.seed;
    t.train_fraction = tasks.train_fraction;
    t.importance_top = tasks.importance_top;
    t.forest.n_trees = tasks.n_trees;
    t.forest.max_features = forest::max_features_from_string(tasks.max_features);
    t.forest.min_samples_leaf = tasks.min_samples_leaf;
    t.forest.max_depth = tasks.max_depth;
    t.forest.tie_break = forest::tie_break_from_string(tasks.tie_break);
    t.forest.seed = tasks.seed;
    return t;
}

void RunConfig::validate() const {
    if (protocol.n_states < 1) {
        fail("protocol.n_states must be at least 1");
    }
    if (!(protocol.cap_w > 0)) {
        fail("protocol.cap_w must be positive");
    }
    if (!(protocol.zero_keep_ratio >= 0 && protocol.zero_keep_ratio <= 1)) {
        fail("protocol.zero_keep_ratio must lie in [0, 1]");
    }
    if (!(protocol.duration_s > 0) || !(protocol.step_s > 0) || protocol.step_s > protocol.duration_s) {
        fail("protocol.duration_s and step_s must be positive with step_s <= duration_s");
    }
    if (!(protocol.trace_s > 0) || !(protocol.pack_cells > 0)) {
        fail("protocol.trace_s and pack_cells must be positive");
    }
    if (protocol.cycles_per_spec < 1) {
        fail("protocol.cycles_per_spec must be at least 1");
    }
    try {
        fleet_config().validate();
    } catch (const ValidationError& e) {
        fail(std::string("fleet: ") + e.what());
    }
    if (fleet.life.max_cycles < 1 || !(fleet.life.dt > 0)) {
        fail("fleet.max_cycles and fleet.dt must be positive");
    }
    if (!(fleet.life.stop_fraction > 0 && fleet.life.stop_fraction < 1)) {
        fail("fleet.stop_fraction must lie in (0, 1)");
    }
    try {
        space().validate();
    } catch (const ValidationError& e) {
        fail(std::string("features: ") + e.what());
    }
    if (features.grid_len < 2) {
        fail("features.grid_len must be at least 2");
    }
    try {
        life_labels().validate();
        knee_labels().validate();
        task_config().validate();
    } catch (const ValidationError& e) {
        fail(std::string("tasks: ") + e.what());
    }
}

std::string RunConfig::to_text() const {
    auto copy = *this;
    std::ostringstream out;
    bool first = true;
    for (const auto& s : sections(copy)) {
        out << (first ? "" : "\n") << "[" << s.name << "]\n";
        first = false;
        for (const auto& f : s.fields) {
            out << f.key << " = " << f.get() << "\n";
        }
    }
    return out.str();
}

RunConfig parse_config(std::string_view text, const std::string& source) {
    RunConfig cfg;
    parse_into(cfg, text, source);
    return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
    for (auto& s : sections(cfg)) {
        if (s.name != "paths") {
            continue;
        }
        for (auto& f : s.fields) {
            std::string var = "BATDEG_PATHS_" + f.key;
            std::transform(var.begin(), var.end(), var.begin(), [](unsigned char ch) { return std::toupper(ch); });
            if (const char* v = std::getenv(var.c_str())) {
                Value val;
                val.kind = Value::Kind::string;
                val.text = v;
                f.set(val);
            }
        }
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const RuntimeError& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    auto cfg = parse_config(text, path.string());
    apply_env_overrides(cfg);
    try {
        cfg.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return cfg;
}

RunConfig default_config() {
    RunConfig cfg;
    apply_env_overrides(cfg);
    cfg.validate();
    return cfg;
}

} // namespace batdeg::config

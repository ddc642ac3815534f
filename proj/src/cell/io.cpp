#include "batdeg/cell/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"

namespace batdeg::cell {

using nlohmann::json;

namespace {

json phase_json(const CellHistory& h, const CycleRecord& c, const PhaseRecord& p, const char* name) {
    return {{"cell_id", h.cell_id},
            {"cycle", c.cycle_index},
            {"temp_c", c.temperature},
            {"phase", name},
            {"protocol_id", c.protocol_id},
            {"t", p.t},
            {"v", p.v},
            {"i", p.i},
            {"q", p.q},
            {"e", p.e},
            {"w", p.w},
            {"q_end", p.q_end},
            {"e_end", p.e_end},
            {"duration_s", p.duration_s},
            {"transitions", p.transitions}};
}

void read_phase(const json& j, PhaseRecord& p) {
    p.t = j.at("t").get<std::vector<double>>();
    p.v = j.at("v").get<std::vector<double>>();
    p.i = j.at("i").get<std::vector<double>>();
    p.q = j.at("q").get<std::vector<double>>();
    p.e = j.at("e").get<std::vector<double>>();
    p.w = j.at("w").get<std::vector<double>>();
    const auto n = p.t.size();
    if (p.v.size() != n || p.i.size() != n || p.q.size() != n || p.e.size() != n || p.w.size() != n) {
        throw ValidationError("phase arrays differ in length");
    }
    p.q_end = j.contains("q_end") ? j.at("q_end").get<double>() : (n ? p.q.back() : 0.0);
    p.e_end = j.contains("e_end") ? j.at("e_end").get<double>() : (n ? p.e.back() : 0.0);
    p.duration_s = j.contains("duration_s") ? j.at("duration_s").get<double>() : (n ? p.t.back() : 0.0);
    p.transitions = j.value("transitions", std::size_t{0});
}

} // namespace

void write_history_jsonl(std::ostream& out, const CellHistory& h) {
    for (const auto& c : h.cycles) {
        out << phase_json(h, c, c.charge, "charge").dump() << '\n';
        out << phase_json(h, c, c.discharge, "discharge").dump() << '\n';
    }
}

void write_history_jsonl(const std::filesystem::path& path, const CellHistory& h) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw RuntimeError("cannot write " + tmp.string());
        }
        write_history_jsonl(out, h);
        if (!out) {
            throw RuntimeError("short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<CycleRecord> read_cycles_jsonl(std::istream& in, const std::string& source) {
    std::vector<CycleRecord> cycles;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            const auto n = j.at("cycle").get<std::size_t>();
            if (cycles.empty() || cycles.back().cycle_index != n) {
                if (n != cycles.size() + 1) {
                    throw ValidationError("cycle " + std::to_string(n) + " out of order");
                }
                CycleRecord c;
                c.cycle_index = n;
                c.temperature = j.at("temp_c").get<double>();
                c.protocol_id = j.value("protocol_id", std::string{});
                cycles.push_back(std::move(c));
            }
            const auto phase = j.at("phase").get<std::string>();
            if (phase == "charge") {
                read_phase(j, cycles.back().charge);
            } else if (phase == "discharge") {
                read_phase(j, cycles.back().discharge);
            } else {
                throw ValidationError("unknown phase '" + phase + "'");
            }
        } catch (const json::exception& e) {
            throw ValidationError(source + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cycles;
}

json to_json(const CellParams& p) {
    return {{"rated_capacity", p.rated_capacity},
            {"v_min", p.v_min},
            {"v_max", p.v_max},
            {"ocv_soc", p.ocv.soc},
            {"ocv_v", p.ocv.volts},
            {"r0", p.r0},
            {"r_growth", p.r_growth},
            {"fade_per_cycle", p.fade_per_cycle},
            {"knee_cycle", p.knee_cycle},
            {"knee_fade_multiplier", p.knee_fade_multiplier},
            {"temperature", p.temperature},
            {"low_temp_penalty", p.low_temp_penalty},
            {"high_temp_penalty", p.high_temp_penalty},
            {"cold_capacity_coeff", p.cold_capacity_coeff},
            {"cold_resistance_coeff", p.cold_resistance_coeff},
            {"manufacturing_spread", p.manufacturing_spread},
            {"seed", p.seed}};
}

CellParams cell_params_from_json(const json& j) {
    CellParams p;
    try {
        p.rated_capacity = j.at("rated_capacity").get<double>();
        p.v_min = j.at("v_min").get<double>();
        p.v_max = j.at("v_max").get<double>();
        p.ocv.soc = j.at("ocv_soc").get<std::vector<double>>();
        p.ocv.volts = j.at("ocv_v").get<std::vector<double>>();
        p.r0 = j.at("r0").get<double>();
        p.r_growth = j.at("r_growth").get<double>();
        p.fade_per_cycle = j.at("fade_per_cycle").get<double>();
        p.knee_cycle = j.at("knee_cycle").get<std::size_t>();
        p.knee_fade_multiplier = j.at("knee_fade_multiplier").get<double>();
        p.temperature = j.at("temperature").get<double>();
        p.low_temp_penalty = j.at("low_temp_penalty").get<double>();
        p.high_temp_penalty = j.at("high_temp_penalty").get<double>();
        p.cold_capacity_coeff = j.at("cold_capacity_coeff").get<double>();
        p.cold_resistance_coeff = j.at("cold_resistance_coeff").get<double>();
        p.manufacturing_spread = j.at("manufacturing_spread").get<double>();
        p.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad cell parameters: ") + e.what());
    }
    p.validate();
    return p;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries) {
    json cells = json::array();
    for (const auto& e : entries) {
        cells.push_back({{"cell_id", e.cell_id},
                         {"params", to_json(e.params)},
                         {"end_reason", to_string(e.end_reason)},
                         {"has_knee", e.has_knee}});
    }
    io::write_file_atomic(dir / "fleet.json", json{{"version", 1}, {"cells", cells}}.dump(1) + "\n");
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "fleet.json";
    std::vector<DatasetEntry> out;
    try {
        const auto j = json::parse(io::read_file(path));
        for (const auto& c : j.at("cells")) {
            DatasetEntry e;
            e.cell_id = c.at("cell_id").get<std::string>();
            e.params = cell_params_from_json(c.at("params"));
            e.end_reason = end_reason_from_string(c.at("end_reason").get<std::string>());
            e.has_knee = c.value("has_knee", false);
            out.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return out;
}

CellHistory load_cell(const std::filesystem::path& dir, const DatasetEntry& entry) {
    const auto path = dir / (entry.cell_id + ".jsonl");
    std::ifstream in(path);
    if (!in) {
        throw RuntimeError("cannot open " + path.string());
    }
    CellHistory h;
    h.cell_id = entry.cell_id;
    h.params = entry.params;
    h.end_reason = entry.end_reason;
    h.cycles = read_cycles_jsonl(in, path.string());
    return h;
}

} // namespace batdeg::cell

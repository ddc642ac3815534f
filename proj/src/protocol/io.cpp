#include "batdeg/protocol/io.hpp"

#include <sstream>

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"

namespace batdeg::protocol {

using nlohmann::json;

SpeedTrace parse_speed_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("speed CSV is empty");
    }
    const auto header = io::split_csv_line(line);
    if (header.size() != 2 || header[0] != "time_s" || header[1] != "speed_mps") {
        throw ValidationError("speed CSV header must be 'time_s,speed_mps'");
    }
    SpeedTrace trace;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = io::split_csv_line(line);
        if (f.size() != 2) {
            throw ValidationError("speed CSV line " + std::to_string(row) + " needs 2 fields");
        }
        trace.time_s.push_back(io::parse_double(f[0], "time_s"));
        trace.speed_mps.push_back(io::parse_double(f[1], "speed_mps"));
    }
    return trace;
}

SpeedTrace read_speed_csv(const std::filesystem::path& path) {
    try {
        return parse_speed_csv(io::read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

json to_json(const ProtocolSpec& spec) {
    json steps = json::array();
    for (const auto& s : spec.steps) {
        steps.push_back({{"duration_s", s.duration_s}, {"power_w", s.power_w}});
    }
    return {{"protocol_id", spec.protocol_id}, {"seed", spec.seed}, {"steps", steps}, {"cycles", spec.cycles}};
}

ProtocolSpec protocol_from_json(const json& j) {
    try {
        ProtocolSpec spec;
        spec.protocol_id = j.at("protocol_id").get<std::string>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("steps")) {
            spec.steps.push_back({s.at("duration_s").get<double>(), s.at("power_w").get<double>()});
        }
        if (j.contains("cycles")) {
            spec.cycles = j.at("cycles").get<std::size_t>();
        }
        return spec;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad protocol JSON: ") + e.what());
    }
}

ProtocolSpec read_protocol(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    try {
        return protocol_from_json(j);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_protocol(const std::filesystem::path& path, const ProtocolSpec& spec) {
    io::write_file_atomic(path, to_json(spec).dump(1) + "\n");
}

json to_json(const GaussianHmm& m) {
    return {{"n_states", m.n_states},   {"transition", m.transition}, {"means", m.means},
            {"variances", m.variances}, {"initial", m.initial}};
}

GaussianHmm hmm_from_json(const json& j) {
    GaussianHmm m;
    try {
        m.n_states = j.at("n_states").get<std::size_t>();
        m.transition = j.at("transition").get<std::vector<double>>();
        m.means = j.at("means").get<std::vector<double>>();
        m.variances = j.at("variances").get<std::vector<double>>();
        m.initial = j.at("initial").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad HMM JSON: ") + e.what());
    }
    m.validate();
    return m;
}

} // namespace batdeg::protocol

#pragma once

#include <filesystem>
#include <string_view>

#include "json.hpp"

#include "batdeg/protocol/hmm.hpp"
#include "batdeg/protocol/protocol.hpp"

namespace batdeg::protocol {

/// CSV with header `time_s,speed_mps`.
SpeedTrace parse_speed_csv(std::string_view text);
SpeedTrace read_speed_csv(const std::filesystem::path& path);

/// `{"protocol_id": ..., "seed": ..., "steps": [{"duration_s": ..., "power_w": ...}], "cycles": n}`;
/// `cycles` is optional on input (default 1).
nlohmann::json to_json(const ProtocolSpec& spec);
ProtocolSpec protocol_from_json(const nlohmann::json& j);
ProtocolSpec read_protocol(const std::filesystem::path& path);
void write_protocol(const std::filesystem::path& path, const ProtocolSpec& spec);

/// `{"n_states": n, "transition": [n*n row-major], "means": [...], "variances": [...], "initial": [...]}`
nlohmann::json to_json(const GaussianHmm& model);
GaussianHmm hmm_from_json(const nlohmann::json& j);

} // namespace batdeg::protocol

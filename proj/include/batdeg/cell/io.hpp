#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "batdeg/cell/cell.hpp"

namespace batdeg::cell {

// One JSON object per (cycle, phase), charge before discharge:
//   {"cell_id", "cycle", "temp_c", "phase": "charge"|"discharge", "protocol_id",
//    "t", "v", "i", "q", "e", "w", "q_end", "e_end", "duration_s", "transitions"}
// Summary-only cycles carry empty arrays.

void write_history_jsonl(std::ostream& out, const CellHistory& history);
void write_history_jsonl(const std::filesystem::path& path, const CellHistory& history);

/// Cycles of one cell; params and end reason come from the manifest.
std::vector<CycleRecord> read_cycles_jsonl(std::istream& in, const std::string& source_name);

nlohmann::json to_json(const CellParams& params);
CellParams cell_params_from_json(const nlohmann::json& j);

/// Dataset directory: one <cell_id>.jsonl per cell plus fleet.json listing
/// cell ids, params, end reasons and the construction knee flag.
struct DatasetEntry {
    std::string cell_id;
    CellParams params;
    EndReason end_reason = EndReason::max_cycles;
    bool has_knee = false;
};

void write_manifest(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries);
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir);

CellHistory load_cell(const std::filesystem::path& dir, const DatasetEntry& entry);

} // namespace batdeg::cell

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "batdeg/cell/cell.hpp"
#include "batdeg/protocol/hmm.hpp"

namespace batdeg::cell {

/// Synthetic fleet: cell i runs at temperatures[i % size], a seeded subset of
/// knee_fraction of the cells gets a knee, and every cycle draws a fresh
/// protocol from the HMM.
///
/// A knee lands at a uniform fraction in [knee_at_min, knee_at_max] of the
/// cell's expected 80% life (0.2 / (fade * temperature factor)), but not
/// before knee_cycle_floor, so the faster post-knee fade is still recorded
/// for a full 50-cycle window before the 50% stop.
struct FleetConfig {
    std::size_t cells = 40;
    std::vector<double> temperatures{-10.0, 10.0, 25.0, 45.0, 70.0};
    double knee_fraction = 0.0;
    double knee_at_min = 0.35;
    double knee_at_max = 0.6;
    std::size_t knee_cycle_floor = 100;
    double knee_fade_multiplier = 4.0;
    /// Knee-prone cells age faster in resistance, which shows in early cycles.
    double knee_r_growth = 0.12;
    /// Log-normal spread of the per-cell fade rate.
    double fade_spread = 0.25;
    CellParams base;
    ChargeSpec charge;
    LifeOptions life;
    protocol::GenerateOptions protocol;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CellSetup {
    std::string cell_id;
    CellParams params;
    bool has_knee = false;
    std::uint64_t protocol_seed = 0;
};

CellSetup make_cell(const FleetConfig& cfg, std::size_t index);

/// Seed of the protocol driven in a given cycle of a cell.
std::uint64_t cycle_seed(std::uint64_t protocol_seed, std::size_t cycle) noexcept;

CellHistory simulate_cell(const FleetConfig& cfg, const protocol::GaussianHmm& model, std::size_t index);

/// Every cell of the fleet in index order; `jobs` caps worker threads and
/// does not change the result.
std::vector<CellHistory> simulate_fleet(const FleetConfig& cfg, const protocol::GaussianHmm& model,
                                        std::size_t jobs = 1);

} // namespace batdeg::cell

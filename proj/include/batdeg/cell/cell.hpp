#pragma once

// Equivalent-circuit cell: V = OCV(SOC) - I R for discharge, OCV + I R for
// charge, with capacity and resistance set per cycle by a simple ageing law.
// Sign convention: discharge current and power are positive, charge negative.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "batdeg/protocol/protocol.hpp"

namespace batdeg::cell {

struct OcvTable {
    std::vector<double> soc; ///< strictly increasing
    std::vector<double> volts; ///< strictly increasing

    /// Piecewise-linear, extrapolated linearly beyond both ends.
    double operator()(double soc) const noexcept;

    static OcvTable nmc_graphite();
};

struct CellParams {
    double rated_capacity = 2.2; ///< Ah
    double v_min = 2.75;
    double v_max = 4.2;
    OcvTable ocv = OcvTable::nmc_graphite();
    double r0 = 0.015; ///< ohm at cycle 0 and 25 C
    double r_growth = 0.02; ///< R_n = r0 (1 + r_growth sqrt(n))
    double fade_per_cycle = 0.0004; ///< fraction of initial capacity per cycle
    std::size_t knee_cycle = 0; ///< 0: no knee
    double knee_fade_multiplier = 6.0;
    double temperature = 25.0; ///< C
    /// Fade-rate factor 1 + low (30 - T)+ + high (T - 55)+.
    double low_temp_penalty = 0.03;
    double high_temp_penalty = 0.03;
    /// Initial capacity scaled by 1 - coeff (25 - T)+, resistance by 1 + coeff (25 - T)+.
    double cold_capacity_coeff = 0.002;
    double cold_resistance_coeff = 0.02;
    /// Relative standard deviation of a seeded manufacturing offset on capacity and resistance.
    double manufacturing_spread = 0.0;
    std::uint64_t seed = 0;

    void validate() const;

    double temperature_factor() const noexcept;
    /// Capacity and resistance in force during cycle n (1-based).
    double capacity_at(std::size_t cycle) const noexcept;
    double resistance_at(std::size_t cycle) const noexcept;
};

struct ChargeSpec {
    double high_power = 14.0; ///< W, until the loaded voltage reaches switch_voltage
    double low_power = 5.0; ///< W, until the loaded voltage would pass v_max
    double switch_voltage = 4.05;
    double max_duration_s = 3.0 * 3600.0;

    void validate(const CellParams& params) const;
};

/// One phase of one cycle. q and e are trapezoidal integrals of |i| and |w|
/// from the start of the phase (Ah, Wh). Arrays may be decimated; q_end and
/// e_end always describe the full-resolution phase.
struct PhaseRecord {
    std::vector<double> t;
    std::vector<double> v;
    std::vector<double> i;
    std::vector<double> q;
    std::vector<double> e;
    std::vector<double> w;
    double q_end = 0.0;
    double e_end = 0.0;
    double duration_s = 0.0;
    std::size_t transitions = 0; ///< power changes between consecutive samples

    std::size_t size() const noexcept { return t.size(); }
    bool has_samples() const noexcept { return !t.empty(); }
};

enum class Phase { charge, discharge };

struct CycleRecord {
    std::size_t cycle_index = 0;
    double temperature = 0.0;
    std::string protocol_id;
    PhaseRecord charge;
    PhaseRecord discharge;

    const PhaseRecord& phase(Phase p) const noexcept { return p == Phase::charge ? charge : discharge; }
    double discharge_capacity() const noexcept { return discharge.q_end; }
};

enum class EndReason { reached_eol, max_cycles, protocol_exhausted };

std::string to_string(EndReason r);
EndReason end_reason_from_string(const std::string& s);

struct CellHistory {
    std::string cell_id;
    CellParams params;
    std::vector<CycleRecord> cycles;
    EndReason end_reason = EndReason::max_cycles;

    std::vector<double> discharge_capacities() const;
};

struct CellState {
    double soc = 1.0; ///< fraction of the capacity in force
    std::size_t cycle = 0; ///< completed cycles
};

/// State after a formation charge from empty with the cycle-1 capacity, so
/// cycle 1 starts where every later cycle starts.
CellState formation_state(const CellParams& params, const ChargeSpec& charge, double dt = 1.0);

struct StepOptions {
    double dt = 1.0;
    /// Keep every k-th sample in the record plus the samples on either side of
    /// each power change and the last one. 0 keeps only the phase totals.
    std::size_t record_every = 1;
};

/// Runs cycle state.cycle + 1: protocol discharge from the current state,
/// then the two-stage charge. Discharge stops at the first sample whose
/// loaded voltage would fall below v_min (or whose power is infeasible) or
/// at the end of the protocol; charge stops when the loaded voltage would
/// pass v_max at low power.
CycleRecord run_cycle(CellState& state, const CellParams& params, const protocol::ProtocolSpec& protocol,
                      const ChargeSpec& charge, const StepOptions& options = {});

struct LifeOptions {
    std::size_t max_cycles = 3000;
    double dt = 1.0;
    std::size_t record_every = 1;
    /// Cycles past this index keep only phase totals.
    std::size_t detail_cycles = static_cast<std::size_t>(-1);
    double stop_fraction = 0.5; ///< stop once discharge capacity < fraction * rated
};

/// Returns the protocol for a 1-based cycle index, or nothing when exhausted.
using ProtocolSource = std::function<std::optional<protocol::ProtocolSpec>(std::size_t cycle)>;

CellHistory run_life(const std::string& cell_id, const CellParams& params, const ProtocolSource& protocols,
                     const ChargeSpec& charge = {}, const LifeOptions& options = {});

/// Uses protocols in order, one per cycle.
CellHistory run_life(const std::string& cell_id, const CellParams& params,
                     const std::vector<protocol::ProtocolSpec>& protocols, const ChargeSpec& charge = {},
                     const LifeOptions& options = {});

} // namespace batdeg::cell

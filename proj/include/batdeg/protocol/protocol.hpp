#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace batdeg::protocol {

struct SpeedTrace {
    std::vector<double> time_s;
    std::vector<double> speed_mps;

    std::size_t size() const noexcept { return time_s.size(); }
};

struct PowerTrace {
    std::vector<double> time_s;
    std::vector<double> power_w;

    std::size_t size() const noexcept { return time_s.size(); }
};

/// Longitudinal vehicle model constants. Defaults describe a compact EV.
struct VehicleParams {
    double mass_kg = 1500.0;
    double drag_area_m2 = 0.7; ///< drag coefficient times frontal area
    double air_density = 1.2;
    double rolling_coeff = 0.01;
    double drivetrain_efficiency = 0.9;
    double gravity = 9.81;

    void validate() const;
};

/// P(t) = max(0, v (m a + rho CdA v^2 / 2 + Crr m g) / eta), with a the forward
/// difference of speed (backward at the last sample).
PowerTrace speed_to_power(const SpeedTrace& trace, const VehicleParams& params);

/// Multiplies every power by `factor` (pack power to single-cell power).
PowerTrace scale_power(PowerTrace trace, double factor);

/// Aggressive highway-style speed trace at 1 Hz: idle, hard accelerations,
/// fluctuating cruise and braking. Stand-in when no measured schedule is given.
SpeedTrace synthetic_highway_trace(double duration_s, std::uint64_t seed);

struct ProtocolStep {
    double duration_s = 0.0;
    double power_w = 0.0;

    bool operator==(const ProtocolStep&) const = default;
};

/// Timed sequence of constant-power discharge steps.
struct ProtocolSpec {
    std::string protocol_id;
    std::uint64_t seed = 0;
    std::vector<ProtocolStep> steps;
    /// Number of cycles the spec drives when queued on a cycler.
    std::size_t cycles = 1;

    double total_duration_s() const noexcept;
    /// Number of power changes between consecutive steps.
    std::size_t transitions() const noexcept;
    void validate(double cap_w) const;

    bool operator==(const ProtocolSpec&) const = default;
};

/// Clips powers into [0, cap], rounds them to 0.01 W, shortens every run of
/// zero-power samples to ceil(ratio * run length) samples and merges adjacent
/// equal powers into steps.
ProtocolSpec postprocess(const PowerTrace& trace, double cap_w, double zero_keep_ratio,
                         std::string protocol_id = {}, std::uint64_t seed = 0);

} // namespace batdeg::protocol

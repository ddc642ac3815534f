#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "batdeg/cell/cell.hpp"

namespace batdeg::pipeline {

struct LifeLabelConfig {
    std::size_t nominal_window = 5;
    double eol_fraction = 0.8;
    std::size_t early_window = 50;
    std::size_t min_cycles = 50;

    void validate() const;
};

enum class KneeMode { max_slope, max_slope_change };

std::string to_string(KneeMode m);
KneeMode knee_mode_from_string(const std::string& s);

struct KneeConfig {
    std::size_t interval = 50;
    double threshold = 0.0005; ///< Ah per cycle
    KneeMode mode = KneeMode::max_slope_change;

    void validate() const;
};

/// Mean discharge capacity of the first `window` cycles.
double nominal_capacity(std::span<const double> capacities, std::size_t window = 5);
double nominal_capacity(const cell::CellHistory& history, std::size_t window = 5);

struct LifeResult {
    bool censored = true;
    std::size_t cycles = 0; ///< first cycle (1-based) below eol_fraction * nominal; 0 when censored
};

/// Strict <, first crossing, no interpolation.
LifeResult cycle_life(std::span<const double> capacities, const LifeLabelConfig& cfg = {});
LifeResult cycle_life(const cell::CellHistory& history, const LifeLabelConfig& cfg = {});

struct KneeResult {
    bool knee = false;
    /// Least-squares decay rate (positive when capacity falls) of each full
    /// consecutive window of `interval` cycles.
    std::vector<double> slopes;
    double score = 0.0; ///< max slope or max slope increase, per mode
};

/// Needs at least two full windows.
KneeResult knee_label(std::span<const double> capacities, const KneeConfig& cfg = {});
KneeResult knee_label(const cell::CellHistory& history, const KneeConfig& cfg = {});

} // namespace batdeg::pipeline

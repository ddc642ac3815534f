#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "batdeg/cell/cell.hpp"
#include "batdeg/features/expr.hpp"

namespace batdeg::features {

struct ResampleOptions {
    std::size_t grid_len = 100;
    double v_min = 2.75; ///< QV voltage grid spans [v_min, v_max]
    double v_max = 4.2;
};

/// Fixed-length curves of one cycle, indexed by Signal::index().
///   VQ   V at grid_len uniform points of Q over [0, Q_end]
///   QV   Q at grid_len uniform points of V over [v_min, v_max]; the first
///        crossing of each grid voltage in phase order, NaN if never crossed
///   I, V, E, W  on grid_len uniform points of t over [0, t_end]
///   dVdQ (V[2k+1] - V[2k]) / (Q[2k+1] - Q[2k]) over raw sample pairs; NaN
///        where dQ is 0
struct ResampledCycle {
    std::array<std::vector<double>, 2 * kSignalKinds> signals;

    const std::vector<double>& operator[](Signal s) const noexcept { return signals[s.index()]; }
};

/// Throws ValidationError naming the cycle and phase when a phase has fewer
/// than two recorded samples.
ResampledCycle resample_cycle(const cell::CycleRecord& record, const ResampleOptions& options = {});

/// Linear interpolation of y(x) at `grid` for strictly increasing x;
/// NaN outside [x.front(), x.back()].
std::vector<double> interp(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& grid);

std::vector<double> uniform_grid(double lo, double hi, std::size_t n);

/// Q as a function of V by first crossing; NaN where no segment crosses.
std::vector<double> first_crossing(const std::vector<double>& v, const std::vector<double>& q,
                                   const std::vector<double>& grid);

} // namespace batdeg::features

#include "batdeg/features/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "batdeg/error.hpp"

namespace batdeg::features {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    for (std::size_t k = 0; k < n; ++k) {
        g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    g[n - 1] = hi;
    return g;
}

std::vector<double> interp(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& grid) {
    std::vector<double> out(grid.size(), kNaN);
    if (x.empty()) {
        return out;
    }
    std::size_t j = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double g = grid[k];
        if (g < x.front() || g > x.back()) {
            continue;
        }
        if (x.size() == 1) {
            out[k] = y[0];
            continue;
        }
        if (grid[k] < x[j]) {
            j = 0;
        }
        while (j + 2 < x.size() && x[j + 1] < g) {
            ++j;
        }
        const double f = (g - x[j]) / (x[j + 1] - x[j]);
        out[k] = f == 1.0 ? y[j + 1] : y[j] + f * (y[j + 1] - y[j]);
    }
    return out;
}

std::vector<double> first_crossing(const std::vector<double>& v, const std::vector<double>& q,
                                   const std::vector<double>& grid) {
    const std::size_t n = grid.size();
    std::vector<double> out(n, kNaN);
    if (v.empty() || n == 0) {
        return out;
    }
    const double lo = grid.front();
    const double step = n > 1 ? (grid.back() - grid.front()) / static_cast<double>(n - 1) : 1.0;
    std::size_t unset = n;
    auto fill = [&](std::size_t k, double value) {
        if (std::isnan(out[k])) {
            out[k] = value;
            --unset;
        }
    };
    for (std::size_t s = 0; s + 1 < v.size() && unset > 0; ++s) {
        const double a = std::min(v[s], v[s + 1]);
        const double b = std::max(v[s], v[s + 1]);
        const auto first = static_cast<std::ptrdiff_t>(std::ceil((a - lo) / step - 1e-9));
        const auto last = static_cast<std::ptrdiff_t>(std::floor((b - lo) / step + 1e-9));
        for (auto k = std::max<std::ptrdiff_t>(first, 0); k <= last && k < static_cast<std::ptrdiff_t>(n); ++k) {
            const double g = grid[static_cast<std::size_t>(k)];
            if (g < a || g > b) {
                continue;
            }
            const double f = v[s + 1] == v[s] ? 0.0 : (g - v[s]) / (v[s + 1] - v[s]);
            fill(static_cast<std::size_t>(k), q[s] + f * (q[s + 1] - q[s]));
        }
    }
    if (v.size() == 1) {
        for (std::size_t k = 0; k < n; ++k) {
            if (grid[k] == v[0]) {
                fill(k, q[0]);
            }
        }
    }
    return out;
}

namespace {

void resample_phase(const cell::PhaseRecord& p, Direction dir, const ResampleOptions& o, ResampledCycle& out) {
    auto slot = [&out, dir](SignalKind k) -> std::vector<double>& { return out.signals[Signal{k, dir}.index()]; };

    // VQ: drop samples whose Q does not increase so the abscissa is strictly increasing.
    std::vector<double> qs;
    std::vector<double> vs;
    qs.reserve(p.size());
    vs.reserve(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (qs.empty() || p.q[k] > qs.back()) {
            qs.push_back(p.q[k]);
            vs.push_back(p.v[k]);
        }
    }
    slot(SignalKind::VQ) = interp(qs, vs, uniform_grid(0.0, p.q.back(), o.grid_len));
    slot(SignalKind::QV) = first_crossing(p.v, p.q, uniform_grid(o.v_min, o.v_max, o.grid_len));

    const auto tg = uniform_grid(0.0, p.t.back() - p.t.front(), o.grid_len);
    std::vector<double> t0(p.t);
    for (double& t : t0) {
        t -= p.t.front();
    }
    slot(SignalKind::I) = interp(t0, p.i, tg);
    slot(SignalKind::V) = interp(t0, p.v, tg);
    slot(SignalKind::E) = interp(t0, p.e, tg);
    slot(SignalKind::W) = interp(t0, p.w, tg);

    auto& d = slot(SignalKind::dVdQ);
    d.resize(p.size() / 2);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const double dq = p.q[2 * k + 1] - p.q[2 * k];
        d[k] = dq == 0.0 ? kNaN : (p.v[2 * k + 1] - p.v[2 * k]) / dq;
    }
}

} // namespace

ResampledCycle resample_cycle(const cell::CycleRecord& rec, const ResampleOptions& o) {
    if (o.grid_len < 2) {
        throw ValidationError("grid_len must be at least 2");
    }
    ResampledCycle out;
    for (auto dir : {Direction::charge, Direction::discharge}) {
        const auto& p = rec.phase(dir == Direction::charge ? cell::Phase::charge : cell::Phase::discharge);
        if (p.size() < 2) {
            throw ValidationError("cycle " + std::to_string(rec.cycle_index) + " " +
                                  (dir == Direction::charge ? "charge" : "discharge") + " phase has " +
                                  std::to_string(p.size()) + " samples, needs 2");
        }
        resample_phase(p, dir, o, out);
    }
    return out;
}

} // namespace batdeg::features

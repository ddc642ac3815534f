#include "batdeg/pipeline/labels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "batdeg/error.hpp"

namespace batdeg::pipeline {

void LifeLabelConfig::validate() const {
    if (nominal_window == 0) {
        throw ValidationError("nominal window must be at least one cycle");
    }
    if (!(eol_fraction > 0) || !(eol_fraction < 1)) {
        throw ValidationError("eol_fraction must lie in (0, 1)");
    }
    if (early_window == 0) {
        throw ValidationError("early window must be at least one cycle");
    }
}

std::string to_string(KneeMode m) { return m == KneeMode::max_slope ? "max_slope" : "max_slope_change"; }

KneeMode knee_mode_from_string(const std::string& s) {
    if (s == "max_slope") {
        return KneeMode::max_slope;
    }
    if (s == "max_slope_change") {
        return KneeMode::max_slope_change;
    }
    throw ValidationError("unknown knee mode '" + s + "'");
}

void KneeConfig::validate() const {
    if (interval < 2) {
        throw ValidationError("knee interval must be at least 2 cycles");
    }
    if (!(threshold > 0)) {
        throw ValidationError("knee threshold must be positive");
    }
}

double nominal_capacity(std::span<const double> q, std::size_t window) {
    if (window == 0 || q.size() < window) {
        throw ValidationError("nominal capacity needs " + std::to_string(window) + " cycles, history has " +
                              std::to_string(q.size()));
    }
    double s = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
        s += q[k];
    }
    return s / static_cast<double>(window);
}

double nominal_capacity(const cell::CellHistory& h, std::size_t window) {
    try {
        return nominal_capacity(h.discharge_capacities(), window);
    } catch (const ValidationError& e) {
        throw ValidationError("cell " + h.cell_id + ": " + e.what());
    }
}

LifeResult cycle_life(std::span<const double> q, const LifeLabelConfig& cfg) {
    cfg.validate();
    const double limit = cfg.eol_fraction * nominal_capacity(q, cfg.nominal_window);
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (q[k] < limit) {
            return {false, k + 1};
        }
    }
    return {};
}

LifeResult cycle_life(const cell::CellHistory& h, const LifeLabelConfig& cfg) {
    return cycle_life(h.discharge_capacities(), cfg);
}

KneeResult knee_label(std::span<const double> q, const KneeConfig& cfg) {
    cfg.validate();
    const std::size_t w = cfg.interval;
    const std::size_t windows = q.size() / w;
    if (windows < 2) {
        throw ValidationError("knee labeling needs two full " + std::to_string(w) + "-cycle windows, history has " +
                              std::to_string(q.size()) + " cycles");
    }
    KneeResult r;
    const double xbar = (static_cast<double>(w) - 1.0) / 2.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
        sxx += (static_cast<double>(k) - xbar) * (static_cast<double>(k) - xbar);
    }
    for (std::size_t win = 0; win < windows; ++win) {
        const auto seg = q.subspan(win * w, w);
        double ybar = 0.0;
        for (double y : seg) {
            ybar += y;
        }
        ybar /= static_cast<double>(w);
        double sxy = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
            sxy += (static_cast<double>(k) - xbar) * (seg[k] - ybar);
        }
        r.slopes.push_back(-sxy / sxx);
    }
    r.score = -std::numeric_limits<double>::infinity();
    if (cfg.mode == KneeMode::max_slope) {
        r.score = *std::max_element(r.slopes.begin(), r.slopes.end());
    } else {
        for (std::size_t i = 0; i + 1 < r.slopes.size(); ++i) {
            r.score = std::max(r.score, r.slopes[i + 1] - r.slopes[i]);
        }
    }
    r.knee = r.score > cfg.threshold;
    return r;
}

KneeResult knee_label(const cell::CellHistory& h, const KneeConfig& cfg) {
    try {
        return knee_label(h.discharge_capacities(), cfg);
    } catch (const ValidationError& e) {
        throw ValidationError("cell " + h.cell_id + ": " + e.what());
    }
}

} // namespace batdeg::pipeline

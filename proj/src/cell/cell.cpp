#include "batdeg/cell/cell.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "batdeg/error.hpp"

namespace batdeg::cell {

double OcvTable::operator()(double s) const noexcept {
    const std::size_t n = soc.size();
    std::size_t hi = 1;
    if (s >= soc[n - 1]) {
        hi = n - 1;
    } else if (s > soc[0]) {
        hi = static_cast<std::size_t>(std::upper_bound(soc.begin(), soc.end(), s) - soc.begin());
    }
    const std::size_t lo = hi - 1;
    const double f = (s - soc[lo]) / (soc[hi] - soc[lo]);
    return volts[lo] + f * (volts[hi] - volts[lo]);
}

OcvTable OcvTable::nmc_graphite() {
    return {{0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
             0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.00},
            {3.00, 3.30, 3.45, 3.53, 3.58, 3.62, 3.65, 3.68, 3.71, 3.74, 3.77,
             3.80, 3.84, 3.88, 3.92, 3.96, 4.00, 4.05, 4.10, 4.15, 4.20}};
}

void CellParams::validate() const {
    if (!(rated_capacity > 0)) {
        throw ValidationError("rated capacity must be positive");
    }
    if (!(v_min < v_max)) {
        throw ValidationError("v_min must be below v_max");
    }
    if (ocv.soc.size() < 2 || ocv.soc.size() != ocv.volts.size()) {
        throw ValidationError("OCV table needs at least two matching points");
    }
    for (std::size_t k = 1; k < ocv.soc.size(); ++k) {
        if (!(ocv.soc[k] > ocv.soc[k - 1]) || !(ocv.volts[k] > ocv.volts[k - 1])) {
            throw ValidationError("OCV table must be strictly increasing");
        }
    }
    if (ocv.volts.front() < v_min || ocv.volts.back() > v_max) {
        throw ValidationError("OCV table leaves [v_min, v_max]");
    }
    if (!(r0 >= 0) || !(r_growth >= 0) || !(fade_per_cycle >= 0) || !(fade_per_cycle < 1)) {
        throw ValidationError("resistance and fade parameters must be non-negative");
    }
    if (knee_cycle > 0 && !(knee_fade_multiplier > 1)) {
        throw ValidationError("knee fade multiplier must exceed 1");
    }
    if (!(low_temp_penalty >= 0) || !(high_temp_penalty >= 0) || !(cold_capacity_coeff >= 0) ||
        !(cold_resistance_coeff >= 0) || !(manufacturing_spread >= 0)) {
        throw ValidationError("temperature coefficients must be non-negative");
    }
    if (capacity_at(1) <= 0) {
        throw ValidationError("temperature penalties leave no capacity");
    }
}

double CellParams::temperature_factor() const noexcept {
    return 1.0 + low_temp_penalty * std::max(0.0, 30.0 - temperature) +
           high_temp_penalty * std::max(0.0, temperature - 55.0);
}

namespace {

// Seeded multiplicative offsets (capacity, resistance); exactly 1 without spread.
std::pair<double, double> manufacturing_offsets(const CellParams& p) {
    if (p.manufacturing_spread == 0.0) {
        return {1.0, 1.0};
    }
    std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g(0.0, p.manufacturing_spread);
    const double c = std::clamp(1.0 + g(rng), 0.5, 1.5);
    const double r = std::clamp(1.0 + g(rng), 0.5, 1.5);
    return {c, r};
}

} // namespace

double CellParams::capacity_at(std::size_t n) const noexcept {
    const double q0 = rated_capacity * (1.0 - cold_capacity_coeff * std::max(0.0, 25.0 - temperature)) *
                      manufacturing_offsets(*this).first;
    const double rate = fade_per_cycle * temperature_factor();
    const auto c = static_cast<double>(n);
    double lost = rate * c;
    if (knee_cycle > 0 && n > knee_cycle) {
        const auto k = static_cast<double>(knee_cycle);
        lost = rate * k + rate * knee_fade_multiplier * (c - k);
    }
    return q0 * std::max(0.0, 1.0 - lost);
}

double CellParams::resistance_at(std::size_t n) const noexcept {
    const double rt = r0 * (1.0 + cold_resistance_coeff * std::max(0.0, 25.0 - temperature)) *
                      manufacturing_offsets(*this).second;
    return rt * (1.0 + r_growth * std::sqrt(static_cast<double>(n)));
}

void ChargeSpec::validate(const CellParams& p) const {
    if (!(high_power > low_power) || !(low_power > 0)) {
        throw ValidationError("charge powers must satisfy high > low > 0");
    }
    if (!(switch_voltage > p.v_min) || !(switch_voltage < p.v_max)) {
        throw ValidationError("charge switch voltage must lie inside (v_min, v_max)");
    }
    if (!(max_duration_s > 0)) {
        throw ValidationError("charge duration limit must be positive");
    }
}

std::string to_string(EndReason r) {
    switch (r) {
    case EndReason::reached_eol:
        return "reached_eol";
    case EndReason::max_cycles:
        return "max_cycles";
    case EndReason::protocol_exhausted:
        return "protocol_exhausted";
    }
    return "?";
}

EndReason end_reason_from_string(const std::string& s) {
    if (s == "reached_eol") {
        return EndReason::reached_eol;
    }
    if (s == "max_cycles") {
        return EndReason::max_cycles;
    }
    if (s == "protocol_exhausted") {
        return EndReason::protocol_exhausted;
    }
    throw ValidationError("unknown end reason '" + s + "'");
}

std::vector<double> CellHistory::discharge_capacities() const {
    std::vector<double> out;
    out.reserve(cycles.size());
    for (const auto& c : cycles) {
        out.push_back(c.discharge_capacity());
    }
    return out;
}

namespace {

struct Sample {
    double t, v, i, w;
};

// Accumulates one phase at full resolution and keeps a decimated record.
class PhaseBuilder {
public:
    PhaseBuilder(PhaseRecord& rec, std::size_t every) : rec_(rec), every_(every) {}

    void add(const Sample& s) {
        if (count_ > 0) {
            const double h = (s.t - prev_.t) / 3600.0;
            q_ += 0.5 * (std::abs(prev_.i) + std::abs(s.i)) * h;
            e_ += 0.5 * (std::abs(prev_.w) + std::abs(s.w)) * h;
            if (s.w != prev_.w) {
                ++rec_.transitions;
                // Keep both sides of a power change so the trapezoid stays exact.
                if (every_ > 0 && !prev_kept_) {
                    push(prev_, prev_q_, prev_e_);
                }
                changed_ = true;
            }
        }
        const bool keep = every_ > 0 && (count_ % every_ == 0 || changed_);
        changed_ = false;
        if (keep) {
            push(s, q_, e_);
        }
        prev_kept_ = keep;
        prev_ = s;
        prev_q_ = q_;
        prev_e_ = e_;
        ++count_;
    }

    double q() const noexcept { return q_; }

    void finish() {
        if (every_ > 0 && count_ > 0 && !prev_kept_) {
            push(prev_, prev_q_, prev_e_);
        }
        rec_.q_end = q_;
        rec_.e_end = e_;
        rec_.duration_s = count_ > 0 ? prev_.t : 0.0;
    }

private:
    void push(const Sample& s, double q, double e) {
        rec_.t.push_back(s.t);
        rec_.v.push_back(s.v);
        rec_.i.push_back(s.i);
        rec_.q.push_back(q);
        rec_.e.push_back(e);
        rec_.w.push_back(s.w);
    }

    PhaseRecord& rec_;
    std::size_t every_;
    std::size_t count_ = 0;
    Sample prev_{};
    double prev_q_ = 0.0;
    double prev_e_ = 0.0;
    bool prev_kept_ = false;
    bool changed_ = false;
    double q_ = 0.0;
    double e_ = 0.0;
};

// Current drawn at constant discharge power p; nullopt when infeasible.
std::optional<double> discharge_current(double ocv, double r, double p) {
    if (p == 0.0) {
        return 0.0;
    }
    if (!(ocv > 0)) {
        return std::nullopt;
    }
    if (r == 0.0) {
        return p / ocv;
    }
    double i = p / ocv;
    for (int k = 0; k < 10; ++k) {
        const double v = ocv - i * r;
        if (!(v > 0)) {
            break;
        }
        const double next = p / v;
        if (std::abs(next - i) <= 1e-13 * std::max(1.0, std::abs(i))) {
            return next;
        }
        i = next;
    }
    // Closed form, smaller root of r i^2 - ocv i + p = 0.
    const double disc = ocv * ocv - 4.0 * r * p;
    if (disc < 0) {
        return std::nullopt;
    }
    return 2.0 * p / (ocv + std::sqrt(disc));
}

// Magnitude of the charging current at constant power p.
double charge_current(double ocv, double r, double p) {
    if (r == 0.0) {
        return p / ocv;
    }
    // Positive root of r i^2 + ocv i - p = 0, written to avoid cancellation.
    return 2.0 * p / (ocv + std::sqrt(ocv * ocv + 4.0 * r * p));
}

void run_discharge(CellState& state, const CellParams& p, const protocol::ProtocolSpec& proto, double capacity,
                   double resistance, const StepOptions& opt, PhaseRecord& rec) {
    PhaseBuilder b(rec, opt.record_every);
    const double soc0 = state.soc;
    const double total = proto.total_duration_s();
    std::size_t step = 0;
    double step_end = proto.steps.empty() ? 0.0 : proto.steps[0].duration_s;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * opt.dt;
        if (t > total + 1e-9 || proto.steps.empty()) {
            break;
        }
        while (t >= step_end - 1e-9 && step + 1 < proto.steps.size()) {
            ++step;
            step_end += proto.steps[step].duration_s;
        }
        const double power = proto.steps[step].power_w;
        const double soc = soc0 - b.q() / capacity;
        const double ocv = p.ocv(soc);
        const auto current = discharge_current(ocv, resistance, power);
        if (!current) {
            break;
        }
        const double v = ocv - *current * resistance;
        if (v < p.v_min) {
            break;
        }
        b.add({t, v, *current, power});
    }
    b.finish();
    state.soc = soc0 - rec.q_end / capacity;
}

void run_charge(CellState& state, const CellParams& p, const ChargeSpec& c, double capacity, double resistance,
                const StepOptions& opt, PhaseRecord& rec) {
    PhaseBuilder b(rec, opt.record_every);
    const double soc0 = state.soc;
    bool high = true;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * opt.dt;
        if (t > c.max_duration_s) {
            break;
        }
        const double soc = soc0 + b.q() / capacity;
        const double ocv = p.ocv(soc);
        double power = high ? c.high_power : c.low_power;
        double i = charge_current(ocv, resistance, power);
        double v = ocv + i * resistance;
        if (high && v >= c.switch_voltage) {
            high = false;
            power = c.low_power;
            i = charge_current(ocv, resistance, power);
            v = ocv + i * resistance;
        }
        if (v > p.v_max) {
            break;
        }
        b.add({t, v, -i, -power});
    }
    b.finish();
    state.soc = soc0 + rec.q_end / capacity;
}

} // namespace

CellState formation_state(const CellParams& params, const ChargeSpec& charge, double dt) {
    CellState state;
    state.soc = 0.0;
    PhaseRecord scratch;
    run_charge(state, params, charge, params.capacity_at(1), params.resistance_at(1), {dt, 0}, scratch);
    state.cycle = 0;
    return state;
}

CycleRecord run_cycle(CellState& state, const CellParams& params, const protocol::ProtocolSpec& protocol,
                      const ChargeSpec& charge, const StepOptions& options) {
    if (!(options.dt > 0)) {
        throw ValidationError("time step must be positive");
    }
    const std::size_t n = state.cycle + 1;
    const double capacity = params.capacity_at(n);
    const double resistance = params.resistance_at(n);
    CycleRecord rec;
    rec.cycle_index = n;
    rec.temperature = params.temperature;
    rec.protocol_id = protocol.protocol_id;
    if (capacity > 0) {
        run_discharge(state, params, protocol, capacity, resistance, options, rec.discharge);
        run_charge(state, params, charge, capacity, resistance, options, rec.charge);
    }
    state.cycle = n;
    return rec;
}

CellHistory run_life(const std::string& cell_id, const CellParams& params, const ProtocolSource& protocols,
                     const ChargeSpec& charge, const LifeOptions& options) {
    params.validate();
    charge.validate(params);
    if (!(options.stop_fraction > 0) || options.stop_fraction >= 1) {
        throw ValidationError("stop fraction must lie in (0, 1)");
    }
    CellHistory h;
    h.cell_id = cell_id;
    h.params = params;
    CellState state = formation_state(params, charge, options.dt);
    h.end_reason = EndReason::max_cycles;
    for (std::size_t n = 1; n <= options.max_cycles; ++n) {
        const auto proto = protocols(n);
        if (!proto) {
            h.end_reason = EndReason::protocol_exhausted;
            break;
        }
        StepOptions step;
        step.dt = options.dt;
        step.record_every = n <= options.detail_cycles ? options.record_every : 0;
        h.cycles.push_back(run_cycle(state, params, *proto, charge, step));
        if (h.cycles.back().discharge_capacity() < options.stop_fraction * params.rated_capacity) {
            h.end_reason = EndReason::reached_eol;
            break;
        }
    }
    return h;
}

CellHistory run_life(const std::string& cell_id, const CellParams& params,
                     const std::vector<protocol::ProtocolSpec>& protocols, const ChargeSpec& charge,
                     const LifeOptions& options) {
    if (protocols.empty()) {
        throw ValidationError("run_life needs at least one protocol");
    }
    return run_life(
        cell_id, params,
        [&protocols](std::size_t n) -> std::optional<protocol::ProtocolSpec> {
            if (n > protocols.size()) {
                return std::nullopt;
            }
            return protocols[n - 1];
        },
        charge, options);
}

} // namespace batdeg::cell

#include "batdeg/protocol/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "batdeg/error.hpp"

namespace batdeg::protocol {

void VehicleParams::validate() const {
    if (!(mass_kg > 0) || !(drag_area_m2 > 0) || !(air_density > 0) || !(rolling_coeff > 0) ||
        !(gravity > 0)) {
        throw ValidationError("vehicle parameters must be positive");
    }
    if (!(drivetrain_efficiency > 0) || drivetrain_efficiency > 1.0) {
        throw ValidationError("drivetrain efficiency must lie in (0, 1]");
    }
}

PowerTrace speed_to_power(const SpeedTrace& trace, const VehicleParams& p) {
    p.validate();
    const std::size_t n = trace.size();
    if (n == 0) {
        throw ValidationError("speed trace is empty");
    }
    if (trace.speed_mps.size() != n) {
        throw ValidationError("speed trace columns differ in length");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(trace.time_s[i] > trace.time_s[i - 1])) {
            throw ValidationError("speed trace time is not strictly increasing at row " + std::to_string(i));
        }
    }

    PowerTrace out;
    out.time_s = trace.time_s;
    out.power_w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = trace.speed_mps[i];
        if (v < 0) {
            throw ValidationError("negative speed at row " + std::to_string(i));
        }
        double accel = 0.0;
        if (n > 1) {
            const std::size_t j = i + 1 < n ? i : i - 1;
            accel = (trace.speed_mps[j + 1] - trace.speed_mps[j]) / (trace.time_s[j + 1] - trace.time_s[j]);
        }
        const double force = p.mass_kg * accel + 0.5 * p.air_density * p.drag_area_m2 * v * v +
                             p.rolling_coeff * p.mass_kg * p.gravity;
        out.power_w[i] = std::max(0.0, v * force / p.drivetrain_efficiency);
    }
    return out;
}

PowerTrace scale_power(PowerTrace trace, double factor) {
    if (!(factor > 0)) {
        throw ValidationError("power scale factor must be positive");
    }
    for (double& p : trace.power_w) {
        p *= factor;
    }
    return trace;
}

SpeedTrace synthetic_highway_trace(double duration_s, std::uint64_t seed) {
    if (!(duration_s >= 1.0)) {
        throw ValidationError("synthetic trace needs a duration of at least 1 s");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    enum class Mode { idle, accelerate, cruise, brake };
    Mode mode = Mode::idle;
    double remaining = uniform(5, 20);
    double speed = 0.0;
    double target = 0.0;
    double rate = 0.0;

    SpeedTrace out;
    const auto n = static_cast<std::size_t>(duration_s);
    out.time_s.reserve(n);
    out.speed_mps.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        out.time_s.push_back(static_cast<double>(t));
        out.speed_mps.push_back(speed);

        switch (mode) {
        case Mode::idle:
            remaining -= 1.0;
            if (remaining <= 0) {
                mode = Mode::accelerate;
                target = uniform(18, 36);
                rate = uniform(1.5, 3.7);
            }
            break;
        case Mode::accelerate:
            speed = std::min(target, speed + rate * uniform(0.7, 1.0));
            if (speed >= target) {
                mode = Mode::cruise;
                remaining = uniform(20, 120);
            }
            break;
        case Mode::cruise:
            speed = std::clamp(speed + uniform(-0.6, 0.6), 10.0, 36.0);
            remaining -= 1.0;
            if (remaining <= 0) {
                const double r = unit(rng);
                if (r < 0.35) {
                    mode = Mode::accelerate;
                    target = std::min(36.0, speed + uniform(3, 12));
                    rate = uniform(1.0, 3.0);
                } else {
                    mode = Mode::brake;
                    target = r < 0.75 ? uniform(0.3, 0.8) * speed : 0.0;
                    rate = uniform(1.0, 3.0);
                }
            }
            break;
        case Mode::brake:
            speed = std::max(target, speed - rate * uniform(0.7, 1.0));
            if (speed <= target) {
                if (target == 0.0) {
                    mode = Mode::idle;
                    remaining = uniform(3, 25);
                } else {
                    mode = Mode::cruise;
                    remaining = uniform(10, 60);
                }
            }
            break;
        }
    }
    return out;
}

double ProtocolSpec::total_duration_s() const noexcept {
    double total = 0.0;
    for (const auto& s : steps) {
        total += s.duration_s;
    }
    return total;
}

std::size_t ProtocolSpec::transitions() const noexcept {
    std::size_t n = 0;
    for (std::size_t i = 1; i < steps.size(); ++i) {
        n += steps[i].power_w != steps[i - 1].power_w ? 1 : 0;
    }
    return n;
}

void ProtocolSpec::validate(double cap_w) const {
    if (steps.empty()) {
        throw ValidationError("protocol '" + protocol_id + "' has no steps");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!(steps[i].duration_s > 0)) {
            throw ValidationError("protocol '" + protocol_id + "' step " + std::to_string(i) +
                                  " has non-positive duration");
        }
        if (!(steps[i].power_w >= 0) || steps[i].power_w > cap_w) {
            throw ValidationError("protocol '" + protocol_id + "' step " + std::to_string(i) +
                                  " power outside [0, cap]");
        }
    }
    if (cycles == 0) {
        throw ValidationError("protocol '" + protocol_id + "' drives zero cycles");
    }
}

ProtocolSpec postprocess(const PowerTrace& trace, double cap_w, double zero_keep_ratio, std::string protocol_id,
                         std::uint64_t seed) {
    if (!(cap_w > 0)) {
        throw ValidationError("power cap must be positive");
    }
    if (!(zero_keep_ratio > 0) || zero_keep_ratio > 1.0) {
        throw ValidationError("zero_keep_ratio must lie in (0, 1]");
    }
    const std::size_t n = trace.size();
    if (n == 0 || trace.power_w.size() != n) {
        throw ValidationError("power trace is empty or ragged");
    }

    std::vector<double> power(n);
    std::vector<double> duration(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double clipped = std::clamp(trace.power_w[i], 0.0, cap_w);
        power[i] = std::min(cap_w, std::round(clipped * 100.0) / 100.0);
        if (i + 1 < n) {
            duration[i] = trace.time_s[i + 1] - trace.time_s[i];
        } else {
            duration[i] = n > 1 ? trace.time_s[i] - trace.time_s[i - 1] : 1.0;
        }
        if (!(duration[i] > 0)) {
            throw ValidationError("power trace time is not strictly increasing");
        }
    }

    ProtocolSpec spec;
    spec.protocol_id = std::move(protocol_id);
    spec.seed = seed;
    auto push = [&spec](double p, double d) {
        if (!spec.steps.empty() && spec.steps.back().power_w == p) {
            spec.steps.back().duration_s += d;
        } else {
            spec.steps.push_back({d, p});
        }
    };

    std::size_t i = 0;
    while (i < n) {
        if (power[i] != 0.0) {
            push(power[i], duration[i]);
            ++i;
            continue;
        }
        std::size_t run_end = i;
        while (run_end < n && power[run_end] == 0.0) {
            ++run_end;
        }
        const std::size_t run = run_end - i;
        const auto keep = static_cast<std::size_t>(std::ceil(zero_keep_ratio * static_cast<double>(run) - 1e-9));
        for (std::size_t k = 0; k < std::max<std::size_t>(keep, 1); ++k) {
            push(0.0, duration[i + k]);
        }
        i = run_end;
    }
    return spec;
}

} // namespace batdeg::protocol

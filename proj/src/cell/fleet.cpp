#include "batdeg/cell/fleet.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "batdeg/error.hpp"

namespace batdeg::cell {

namespace {

std::uint64_t splitmix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

void FleetConfig::validate() const {
    if (cells == 0) {
        throw ValidationError("fleet needs at least one cell");
    }
    if (temperatures.empty()) {
        throw ValidationError("fleet needs at least one temperature");
    }
    if (!(knee_fraction >= 0) || knee_fraction > 1) {
        throw ValidationError("knee fraction must lie in [0, 1]");
    }
    if (!(knee_at_min > 0) || !(knee_at_max >= knee_at_min) || knee_at_max >= 1) {
        throw ValidationError("knee position range must satisfy 0 < min <= max < 1");
    }
    if (!(knee_fade_multiplier > 1)) {
        throw ValidationError("knee fade multiplier must exceed 1");
    }
    if (!(fade_spread >= 0)) {
        throw ValidationError("fade spread must be non-negative");
    }
    base.validate();
    charge.validate(base);
}

std::uint64_t cycle_seed(std::uint64_t protocol_seed, std::size_t cycle) noexcept {
    return splitmix(protocol_seed ^ splitmix(cycle));
}

CellSetup make_cell(const FleetConfig& cfg, std::size_t index) {
    if (index >= cfg.cells) {
        throw ValidationError("cell index " + std::to_string(index) + " outside fleet of " +
                              std::to_string(cfg.cells));
    }
    // Knee cells: a seeded choice of round(fraction * cells) indices.
    std::vector<std::size_t> order(cfg.cells);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 pick(splitmix(cfg.seed ^ 0x6b6e6565ULL));
    std::shuffle(order.begin(), order.end(), pick);
    const auto n_knee = static_cast<std::size_t>(std::llround(cfg.knee_fraction * static_cast<double>(cfg.cells)));
    const bool knee = std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_knee), index) !=
                      order.begin() + static_cast<std::ptrdiff_t>(n_knee);

    std::mt19937_64 rng(splitmix(cfg.seed + 1000003ULL * (index + 1)));
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> kc(cfg.knee_at_min, cfg.knee_at_max);

    CellSetup s;
    char id[32];
    std::snprintf(id, sizeof id, "cell-%03zu", index);
    s.cell_id = id;
    s.params = cfg.base;
    s.params.temperature = cfg.temperatures[index % cfg.temperatures.size()];
    s.params.fade_per_cycle = cfg.base.fade_per_cycle * std::exp(cfg.fade_spread * g(rng));
    s.params.seed = rng();
    s.protocol_seed = rng();
    const double knee_frac = kc(rng);
    if (knee) {
        const double rate = s.params.fade_per_cycle * s.params.temperature_factor();
        const double life80 = rate > 0 ? 0.2 / rate : static_cast<double>(cfg.life.max_cycles);
        s.has_knee = true;
        s.params.knee_cycle = std::max(cfg.knee_cycle_floor, static_cast<std::size_t>(std::llround(knee_frac * life80)));
        s.params.knee_fade_multiplier = cfg.knee_fade_multiplier;
        s.params.r_growth = cfg.knee_r_growth;
    }
    return s;
}

CellHistory simulate_cell(const FleetConfig& cfg, const protocol::GaussianHmm& model, std::size_t index) {
    const auto setup = make_cell(cfg, index);
    const auto source = [&](std::size_t n) -> std::optional<protocol::ProtocolSpec> {
        return protocol::generate_protocol(model, cfg.protocol, cycle_seed(setup.protocol_seed, n),
                                           setup.cell_id + "-c" + std::to_string(n));
    };
    return run_life(setup.cell_id, setup.params, source, cfg.charge, cfg.life);
}

std::vector<CellHistory> simulate_fleet(const FleetConfig& cfg, const protocol::GaussianHmm& model,
                                        std::size_t jobs) {
    cfg.validate();
    std::vector<CellHistory> out(cfg.cells);
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, cfg.cells));
    std::vector<std::string> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < cfg.cells; i += workers) {
                out[i] = simulate_cell(cfg, model, i);
            }
        } catch (const std::exception& e) {
            errors[w] = e.what();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw RuntimeError(e);
        }
    }
    return out;
}

} // namespace batdeg::cell

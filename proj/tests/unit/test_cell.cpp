#include <cmath>
#include <sstream>

#include "doctest.h"

#include "batdeg/cell/cell.hpp"
#include "batdeg/cell/fleet.hpp"
#include "batdeg/cell/io.hpp"
#include "batdeg/error.hpp"
#include "batdeg/pipeline/labels.hpp"

using namespace batdeg;
using namespace batdeg::cell;
using protocol::ProtocolSpec;

namespace {

ProtocolSpec constant(double watts, double seconds) { return {"const", 0, {{seconds, watts}}, 1}; }

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        s += 0.5 * (std::abs(y[k]) + std::abs(y[k - 1])) * (t[k] - t[k - 1]) / 3600.0;
    }
    return s;
}

void check_phase(const PhaseRecord& p, const CellParams& params) {
    REQUIRE(p.size() >= 2);
    for (std::size_t k = 1; k < p.size(); ++k) {
        CHECK(p.t[k] > p.t[k - 1]);
        CHECK(p.q[k] >= p.q[k - 1]);
    }
    for (double v : p.v) {
        CHECK(v >= params.v_min - 0.05);
        CHECK(v <= params.v_max + 0.05);
    }
    CHECK(std::abs(trapezoid(p.t, p.w) - p.e_end) <= 1e-3 * p.e_end);
    CHECK(std::abs(trapezoid(p.t, p.i) - p.q_end) <= 1e-3 * p.q_end);
    CHECK(p.q.back() == p.q_end);
    CHECK(p.e.back() == p.e_end);
}

} // namespace

TEST_CASE("OCV table interpolates and extrapolates") {
    const auto ocv = OcvTable::nmc_graphite();
    CHECK(ocv(0.5) == doctest::Approx(3.77));
    CHECK(ocv(0.525) == doctest::Approx(3.785));
    CHECK(ocv(1.0) == doctest::Approx(4.2));
    CHECK(ocv(0.0) == doctest::Approx(3.0 - 0.02 * 10.0));
}

TEST_CASE("ideal cell at constant power") {
    CellParams p;
    p.r0 = 0.0;
    CellState s;
    const auto rec = run_cycle(s, p, constant(7.0, 3600.0), {});
    CHECK(rec.discharge.e_end == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(rec.discharge.duration_s == 3600.0);
    CHECK(rec.discharge.transitions == 0);
    check_phase(rec.discharge, p);
    check_phase(rec.charge, p);
    CHECK(rec.charge.w.front() < 0);
    CHECK(rec.charge.i.front() < 0);
}

TEST_CASE("zero-power step holds the cell at OCV") {
    CellParams p;
    CellState s;
    s.soc = 0.6;
    const auto rec = run_cycle(s, p, constant(0.0, 100.0), {});
    for (std::size_t k = 0; k < rec.discharge.size(); ++k) {
        CHECK(rec.discharge.i[k] == 0.0);
        CHECK(rec.discharge.v[k] == doctest::Approx(p.ocv(0.6)).epsilon(1e-14));
        CHECK(rec.discharge.q[k] == 0.0);
    }
}

TEST_CASE("a varying protocol cuts off earlier than its constant-power mean") {
    CellParams p;
    ProtocolSpec pulsed{"pulsed", 0, {}, 1};
    for (int k = 0; k < 200; ++k) {
        pulsed.steps.push_back({60.0, k % 2 == 0 ? 0.0 : 14.0});
    }
    CellState aged;
    aged.cycle = 300;
    aged.soc = 0.97;
    CellState a = aged;
    CellState b = aged;
    const auto flat = run_cycle(a, p, constant(7.0, 12000.0), {});
    const auto rough = run_cycle(b, p, pulsed, {});
    CHECK(rough.discharge.q_end < flat.discharge.q_end);
    check_phase(rough.discharge, p);
    CHECK(rough.discharge.transitions + 1 <= pulsed.steps.size());
}

TEST_CASE("decimated records keep the integrals consistent") {
    CellParams p;
    ProtocolSpec proto{"steps", 0, {}, 1};
    for (int k = 0; k < 60; ++k) {
        proto.steps.push_back({97.0 + k % 7, 1.0 + (k * 37 % 15)});
    }
    for (std::size_t every : {1u, 5u, 13u}) {
        CellState s = formation_state(p, {});
        const auto rec = run_cycle(s, p, proto, {}, {1.0, every});
        check_phase(rec.discharge, p);
        check_phase(rec.charge, p);
    }
    CellState s = formation_state(p, {});
    const auto bare = run_cycle(s, p, proto, {}, {1.0, 0});
    CHECK_FALSE(bare.discharge.has_samples());
    CHECK(bare.discharge.q_end > 0);
}

TEST_CASE("charging finishes within an hour") {
    CellParams p;
    CellState s = formation_state(p, {});
    const auto rec = run_cycle(s, p, constant(7.0, 20000.0), {});
    CHECK(rec.charge.duration_s < 3600.0);
    CHECK(rec.charge.q_end == doctest::Approx(rec.discharge.q_end).epsilon(0.02));
}

TEST_CASE("no fade, no resistance growth: flat capacity") {
    CellParams p;
    p.fade_per_cycle = 0.0;
    p.r_growth = 0.0;
    LifeOptions o;
    o.max_cycles = 60;
    o.record_every = 0;
    const auto h = run_life("flat", p, std::vector<ProtocolSpec>(60, constant(7.0, 20000.0)), {}, o);
    CHECK(h.cycles.size() == 60);
    CHECK(h.end_reason == EndReason::max_cycles);
    const double q1 = h.cycles.front().discharge_capacity();
    for (const auto& c : h.cycles) {
        CHECK(std::abs(c.discharge_capacity() - q1) <= 0.005 * q1);
    }
}

TEST_CASE("protocol list exhaustion and EOL stop") {
    CellParams p;
    auto h = run_life("short", p, std::vector<ProtocolSpec>(3, constant(7.0, 20000.0)));
    CHECK(h.end_reason == EndReason::protocol_exhausted);
    CHECK(h.cycles.size() == 3);
    CHECK(h.cycles[2].cycle_index == 3);
    p.fade_per_cycle = 0.01;
    LifeOptions o;
    o.record_every = 0;
    h = run_life("fast", p, std::vector<ProtocolSpec>(500, constant(7.0, 20000.0)), {}, o);
    CHECK(h.end_reason == EndReason::reached_eol);
    CHECK(h.cycles.back().discharge_capacity() < 0.5 * p.rated_capacity);
}

TEST_CASE("a knee at cycle 100 is labelled in both modes") {
    CellParams p;
    p.knee_cycle = 100;
    p.knee_fade_multiplier = 6.0;
    LifeOptions o;
    o.max_cycles = 300;
    o.record_every = 0;
    const auto h = run_life("knee", p, std::vector<ProtocolSpec>(300, constant(7.0, 20000.0)), {}, o);
    CHECK(pipeline::knee_label(h).knee);
    pipeline::KneeConfig k;
    k.mode = pipeline::KneeMode::max_slope;
    CHECK(pipeline::knee_label(h, k).knee);
}

TEST_CASE("cold cells reach end of life sooner") {
    CellParams warm;
    warm.temperature = 30.0;
    CellParams cold = warm;
    cold.temperature = -10.0;
    LifeOptions o;
    o.record_every = 0;
    o.max_cycles = 1500;
    const std::vector<ProtocolSpec> protos(1500, constant(7.0, 20000.0));
    const auto hw = run_life("warm", warm, protos, {}, o);
    const auto hc = run_life("cold", cold, protos, {}, o);
    const auto lw = pipeline::cycle_life(hw);
    const auto lc = pipeline::cycle_life(hc);
    REQUIRE_FALSE(lw.censored);
    REQUIRE_FALSE(lc.censored);
    CHECK(lc.cycles < lw.cycles);
    CHECK(pipeline::nominal_capacity(hc) < pipeline::nominal_capacity(hw));
}

TEST_CASE("fleet cells are deterministic and round-trip through JSONL") {
    FleetConfig cfg;
    cfg.cells = 4;
    cfg.knee_fraction = 0.5;
    cfg.life.max_cycles = 6;
    cfg.life.record_every = 5;
    cfg.life.detail_cycles = 4;
    protocol::GaussianHmm m{2, {0.9, 0.1, 0.2, 0.8}, {2.0, 10.0}, {1.0, 4.0}, {0.5, 0.5}};
    int knees = 0;
    for (std::size_t i = 0; i < cfg.cells; ++i) {
        knees += make_cell(cfg, i).has_knee ? 1 : 0;
    }
    CHECK(knees == 2);
    const auto a = simulate_cell(cfg, m, 1);
    const auto b = simulate_cell(cfg, m, 1);
    REQUIRE(a.cycles.size() == 6);
    for (std::size_t c = 0; c < a.cycles.size(); ++c) {
        CHECK(a.cycles[c].discharge.v == b.cycles[c].discharge.v);
        CHECK(a.cycles[c].discharge.q_end == b.cycles[c].discharge.q_end);
        CHECK(a.cycles[c].protocol_id != a.cycles[(c + 1) % 6].protocol_id);
    }
    CHECK(a.cycles[3].discharge.has_samples());
    CHECK_FALSE(a.cycles[4].discharge.has_samples());

    std::stringstream ss;
    write_history_jsonl(ss, a);
    const auto back = read_cycles_jsonl(ss, "mem");
    REQUIRE(back.size() == a.cycles.size());
    for (std::size_t c = 0; c < back.size(); ++c) {
        CHECK(back[c].discharge.v == a.cycles[c].discharge.v);
        CHECK(back[c].charge.q == a.cycles[c].charge.q);
        CHECK(back[c].discharge.q_end == a.cycles[c].discharge.q_end);
        CHECK(back[c].protocol_id == a.cycles[c].protocol_id);
    }
    const auto p2 = cell_params_from_json(to_json(a.params));
    CHECK(p2.seed == a.params.seed);
    CHECK(p2.fade_per_cycle == a.params.fade_per_cycle);
}

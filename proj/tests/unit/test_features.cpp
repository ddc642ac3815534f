#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "batdeg/cell/cell.hpp"
#include "batdeg/error.hpp"
#include "batdeg/features/evaluate.hpp"
#include "batdeg/features/plan.hpp"
#include "batdeg/features/resample.hpp"

using namespace batdeg;
using namespace batdeg::features;

namespace {

cell::PhaseRecord linear_phase(double v0, double v1, double q1, std::size_t n) {
    cell::PhaseRecord p;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(n - 1);
        p.t.push_back(3600.0 * f);
        p.v.push_back(v0 + (v1 - v0) * f);
        p.q.push_back(q1 * f);
        p.i.push_back(q1);
        p.e.push_back(q1 * 3.5 * f);
        p.w.push_back(q1 * 3.5);
    }
    p.q_end = q1;
    p.e_end = q1 * 3.5;
    p.duration_s = 3600.0;
    return p;
}

cell::CycleRecord linear_cycle() {
    cell::CycleRecord r;
    r.cycle_index = 1;
    r.charge = linear_phase(3.0, 4.2, 2.0, 201);
    r.discharge = linear_phase(4.1, 2.85, 2.0, 201);
    return r;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

cell::CellHistory small_history(std::size_t cycles) {
    cell::CellParams p;
    p.fade_per_cycle = 0.002;
    std::vector<protocol::ProtocolSpec> protos;
    for (std::size_t c = 0; c < cycles; ++c) {
        protos.push_back({"p" + std::to_string(c), 0,
                          {{600.0 + 20.0 * static_cast<double>(c), 4.0},
                           {300.0, 12.0},
                           {600.0, 0.0},
                           {20000.0, 8.0 + 0.1 * static_cast<double>(c)}},
                          1});
    }
    cell::LifeOptions lo;
    lo.dt = 5.0;
    return cell::run_life("cell-000", p, protos, {}, lo);
}

} // namespace

TEST_CASE("resampled curves of a linear discharge") {
    const auto rc = resample_cycle(linear_cycle());
    const auto& vq = rc[{SignalKind::VQ, Direction::discharge}];
    REQUIRE(vq.size() == 100);
    CHECK(vq.front() == doctest::Approx(4.1));
    CHECK(vq.back() == doctest::Approx(2.85));
    double mean = 0.0;
    for (double v : vq) {
        mean += v / 100.0;
    }
    CHECK(mean == doctest::Approx(3.475).epsilon(1e-12));

    // The discharge never reaches 4.2 V, so the top of the QV grid is empty.
    const auto& qv = rc[{SignalKind::QV, Direction::discharge}];
    CHECK(std::isnan(qv.back()));
    CHECK(std::isnan(qv.front())); // 2.75 V is below the 2.85 V end point

    // V(Q) has slope -0.625 V/Ah everywhere.
    for (double d : rc[{SignalKind::dVdQ, Direction::discharge}]) {
        CHECK(d == doctest::Approx(-0.625));
    }
}

TEST_CASE("dVdQ is zero for a flat voltage and NaN where Q stalls") {
    auto r = linear_cycle();
    std::fill(r.discharge.v.begin(), r.discharge.v.end(), 3.7);
    r.discharge.q[1] = r.discharge.q[0];
    const auto rc = resample_cycle(r);
    const auto& d = rc[{SignalKind::dVdQ, Direction::discharge}];
    CHECK(std::isnan(d[0]));
    for (std::size_t k = 1; k < d.size(); ++k) {
        CHECK(d[k] == 0.0);
    }
}

TEST_CASE("resampling rejects a phase with one sample") {
    auto r = linear_cycle();
    r.charge = linear_phase(3.0, 4.2, 2.0, 2);
    r.charge.t.pop_back();
    r.charge.v.pop_back();
    r.charge.q.pop_back();
    r.charge.i.pop_back();
    r.charge.e.pop_back();
    r.charge.w.pop_back();
    CHECK_THROWS_AS(resample_cycle(r), ValidationError);
}

TEST_CASE("cycle groups follow the floor-width partition") {
    const auto g = group_cycles(50, 7);
    REQUIRE(g.size() == 7);
    std::vector<std::size_t> sizes;
    for (auto [b, e] : g) {
        sizes.push_back(e - b);
    }
    CHECK(sizes == std::vector<std::size_t>{7, 7, 7, 7, 7, 7, 8});
    CHECK(g.front().first == 0);
    CHECK(g.back().second == 50);
    CHECK_THROWS_AS(group_cycles(5, 7), ValidationError);
}

TEST_CASE("plan shares stage-1 and stage-2 nodes") {
    const auto space = enumerate_space({});
    const auto plan = compile(space);
    CHECK(plan.features.size() == 112896);
    CHECK(plan.descriptors.size() == 2 * 168);
    CHECK(plan.group_nodes.size() == 2 * 168 * 7 * 6);
    CHECK(plan.groups == 7);
    CHECK(plan.segments == 4);

    std::vector<FeatureExpr> mixed{parse("identity(nanmax(Cycle(6/7))[nanvar(VQ_d(1/4))])"),
                                   parse("identity(nanmax(Cycle(1/5))[nanvar(VQ_d(1/4))])")};
    CHECK_THROWS_AS(compile(mixed), ValidationError);
    CHECK_THROWS_AS(compile(std::span<const FeatureExpr>{}), ValidationError);
}

TEST_CASE("plan evaluation matches the naive interpreter") {
    const auto h = small_history(16);
    REQUIRE(h.cycles.size() == 16);
    const auto space = enumerate_space({});
    std::mt19937_64 rng(7);
    std::vector<FeatureExpr> pick;
    for (int k = 0; k < 3000; ++k) {
        pick.push_back(space[rng() % space.size()]);
    }
    const auto plan = compile(pick);
    const auto fast = evaluate(plan, h, 14);
    const auto slow = evaluate_naive(pick, h, 14);
    REQUIRE(fast.size() == slow.size());
    std::size_t mismatches = 0;
    std::size_t finite = 0;
    for (std::size_t k = 0; k < fast.size(); ++k) {
        mismatches += same(fast[k], slow[k]) ? 0 : 1;
        finite += std::isfinite(fast[k]) ? 1 : 0;
    }
    CHECK(mismatches == 0);
    CHECK(finite > fast.size() / 2);
}

TEST_CASE("group differences vanish on repeated cycles") {
    auto h = small_history(2);
    const auto first = h.cycles.front();
    h.cycles.assign(14, first);
    std::vector<FeatureExpr> diffs;
    for (const auto& e : enumerate_space({})) {
        if (e.selector.is_diff() && e.outer == AggKind::nanmean && e.inner == AggKind::nanmean) {
            diffs.push_back(e);
        }
    }
    const auto v = evaluate(compile(diffs), h, 14);
    for (double x : v) {
        if (!std::isnan(x)) {
            CHECK(x == 0.0);
        }
    }
}

TEST_CASE("short histories are rejected with the cell id") {
    const auto h = small_history(3);
    const auto plan = compile(enumerate_space({}));
    try {
        (void)evaluate(plan, h, 50);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("cell-000") != std::string::npos);
    }
}

TEST_CASE("feature matrix CSV round trip and threaded evaluation") {
    std::vector<cell::CellHistory> cells{small_history(8), small_history(8), small_history(8)};
    cells[1].cell_id = "cell-001";
    cells[2].cell_id = "cell-002";
    cells[2].cycles[3].discharge.v[5] += 0.01;
    std::vector<FeatureExpr> exprs;
    const auto space = enumerate_space({});
    for (std::size_t k = 0; k < space.size(); k += 97) {
        exprs.push_back(space[k]);
    }
    const auto plan = compile(exprs);
    const auto one = evaluate_matrix(plan, cells, 7, {}, 1);
    const auto many = evaluate_matrix(plan, cells, 7, {}, 3);
    REQUIRE(one.values.rows() == 3);
    for (std::size_t k = 0; k < one.values.data().size(); ++k) {
        CHECK(same(one.values.data()[k], many.values.data()[k]));
    }
    std::stringstream ss;
    write_feature_csv(ss, one);
    const auto back = read_feature_csv(ss, "mem");
    CHECK(back.cell_ids == one.cell_ids);
    CHECK(back.names == one.names);
    for (std::size_t k = 0; k < one.values.data().size(); ++k) {
        CHECK(same(one.values.data()[k], back.values.data()[k]));
    }
}

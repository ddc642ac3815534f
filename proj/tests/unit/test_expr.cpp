#include <fstream>
#include <random>
#include <string>
#include <unordered_set>

#include "doctest.h"

#include "batdeg/error.hpp"
#include "batdeg/features/expr.hpp"

using namespace batdeg::features;
using batdeg::ParseError;
using batdeg::ValidationError;

TEST_CASE("parse the grammar examples") {
    const auto e = parse("identity(nanmax(Cycle(6/7))[nanvar(VQ_d(1/4))])");
    CHECK(e.activator == Activator::identity);
    CHECK(e.outer == AggKind::nanmax);
    CHECK(e.selector == CycleSelector::single(6, 7));
    CHECK(e.inner == AggKind::nanvar);
    CHECK(e.signal == Signal{SignalKind::VQ, Direction::discharge});
    CHECK(e.segment == Segment{1, 4});

    const auto f = parse("abs(nankurtosis(Cycle(2/5))[nanmax(E_c(2/4))])");
    CHECK(f.activator == Activator::abs);
    CHECK(f.outer == AggKind::nankurtosis);
    CHECK(f.selector == CycleSelector::single(2, 5));
    CHECK(f.inner == AggKind::nanmax);
    CHECK(f.signal == Signal{SignalKind::E, Direction::charge});
    CHECK(f.segment == Segment{2, 4});

    const auto d = parse("abs(nanmean(Cycle(3/7)-Cycle(6/7))[nanmean(VQ_d(3/4))])");
    CHECK(d.selector == CycleSelector::diff(3, 6, 7));
    CHECK(render(d) == "abs(nanmean(Cycle(3/7) - Cycle(6/7))[nanmean(VQ_d(3/4))])");
    CHECK(parse(" abs ( nanmean ( Cycle ( 3 / 7 ) -  Cycle(6/7))[nanmean(VQ_d(3/4))] ) ") == d);
}

TEST_CASE("every listed feature name round-trips") {
    std::ifstream in(std::string(BATDEG_SOURCE_DIR) + "/tests/data/listed_feature_names.txt");
    REQUIRE(in);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        CHECK(render(parse(line)) == line);
        ++n;
    }
    CHECK(n == 60);
}

TEST_CASE("parse errors carry byte offsets") {
    try {
        parse("identity(nanmax(Cycle(6/7))[nanvar(VQ_x(1/4))])");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 38); // the bad direction letter
    }
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(6/7))[nanvar(VQ_d(1/4))]"), ParseError);
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(6/7))[nanvar(VQ_d(1/4))]) x"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("relu(nanmax(Cycle(6/7))[nanvar(VQ_d(1/4))])"), ParseError);
}

TEST_CASE("out-of-range indices are validation errors") {
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(8/7))[nanvar(VQ_d(1/4))])"), ValidationError);
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(0/7))[nanvar(VQ_d(1/4))])"), ValidationError);
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(1/7))[nanvar(VQ_d(5/4))])"), ValidationError);
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(6/7) - Cycle(3/7))[nanvar(VQ_d(1/4))])"), ValidationError);
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(3/7) - Cycle(3/7))[nanvar(VQ_d(1/4))])"), ValidationError);
    CHECK_THROWS_AS(parse("identity(nanmax(Cycle(3/7) - Cycle(4/6))[nanvar(VQ_d(1/4))])"), ValidationError);
}

TEST_CASE("random ASTs round-trip") {
    std::mt19937_64 rng(42);
    auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int rep = 0; rep < 1000; ++rep) {
        FeatureExpr e;
        e.activator = static_cast<Activator>(pick(0, 1));
        e.outer = static_cast<AggKind>(pick(0, 5));
        e.inner = static_cast<AggKind>(pick(0, 5));
        e.signal = {static_cast<SignalKind>(pick(0, 6)), static_cast<Direction>(pick(0, 1))};
        const int b = pick(1, 12);
        if (b > 1 && pick(0, 1) == 1) {
            const int a = pick(1, b - 1);
            e.selector = CycleSelector::diff(a, pick(a + 1, b), b);
        } else {
            e.selector = CycleSelector::single(pick(1, b), b);
        }
        const int d = pick(1, 10);
        e.segment = {pick(1, d), d};
        CHECK(parse(render(e)) == e);
    }
}

TEST_CASE("space size follows the closed form") {
    SpaceConfig cfg;
    CHECK(space_size(cfg) == 112896);
    cfg.directions = {Direction::discharge};
    CHECK(space_size(cfg) == 56448);
    for (int k = 1; k <= 10; ++k) {
        for (int d = 1; d <= 8; ++d) {
            SpaceConfig c;
            c.groups = k;
            c.segments = d;
            const std::size_t expect = 2u * 7u * d * 6u * (k + k * (k - 1) / 2) * 6u * 2u;
            CHECK(space_size(c) == expect);
            if (k <= 3 && d <= 2) {
                CHECK(enumerate_space(c).size() == expect);
            }
        }
    }
    SpaceConfig one;
    one.groups = 1;
    one.segments = 1;
    one.early_cycles = 1;
    one.directions = {Direction::discharge};
    one.signals = {SignalKind::V};
    one.inner = {AggKind::nanmean};
    one.outer = {AggKind::nanmean};
    one.activators = {Activator::identity};
    CHECK(enumerate_space(one).size() == 1);
}

TEST_CASE("enumeration order and uniqueness") {
    SpaceConfig cfg;
    cfg.groups = 3;
    cfg.segments = 2;
    cfg.early_cycles = 10;
    const auto all = enumerate_space(cfg);
    CHECK(render(all.front()) == "identity(nanmin(Cycle(1/3))[nanmin(VQ_c(1/2))])");
    CHECK(render(all[1]) == "abs(nanmin(Cycle(1/3))[nanmin(VQ_c(1/2))])");
    CHECK(render(all[2]) == "identity(nanmax(Cycle(1/3))[nanmin(VQ_c(1/2))])");
    // Selectors: 1/3, 2/3, 3/3, then (1,2), (1,3), (2,3).
    CHECK(render(all[12 * 3]) == "identity(nanmin(Cycle(1/3) - Cycle(2/3))[nanmin(VQ_c(1/2))])");
    CHECK(render(all.back()) == "abs(nankurtosis(Cycle(2/3) - Cycle(3/3))[nankurtosis(W_d(2/2))])");
    std::unordered_set<FeatureExpr, FeatureExprHash> seen(all.begin(), all.end());
    CHECK(seen.size() == all.size());
}

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "batdeg/error.hpp"
#include "batdeg/forest/forest.hpp"

using namespace batdeg;
using namespace batdeg::forest;

namespace {

struct Planted {
    Matrix x;
    std::vector<double> y;
};

// Column 17 carries the target; the other 50 columns are noise.
Planted planted(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Planted d{Matrix(200, 51), {}};
    for (std::size_t r = 0; r < 200; ++r) {
        for (std::size_t c = 0; c < 51; ++c) {
            d.x(r, c) = g(rng);
        }
        d.y.push_back(d.x(r, 17));
    }
    return d;
}

Matrix one_col(std::vector<double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

} // namespace

TEST_CASE("constant targets give single-leaf trees") {
    const auto d = planted(1);
    std::vector<double> y(200, 0.1);
    ForestConfig cfg;
    cfg.n_trees = 10;
    const auto f = RandomForest::fit(d.x, y, cfg);
    for (const auto& t : f.trees()) {
        CHECK(t.node_count() == 1);
    }
    for (double v : f.predict(d.x)) {
        CHECK(v == 0.1);
    }
    for (double v : f.importances()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("planted informative column ranks first") {
    const auto d = planted(2);
    ForestConfig cfg;
    cfg.n_trees = 100;
    cfg.seed = 5;
    const auto f = RandomForest::fit(d.x, d.y, cfg);
    const auto imp = f.importances();
    CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : imp) {
        CHECK(v >= 0.0);
    }
    const auto top = std::max_element(imp.begin(), imp.end()) - imp.begin();
    CHECK(top == 17);
    CHECK(imp[17] > 0.5);
    const auto rep = f.importance_report({});
    CHECK(rep.ranked.front().first == "x17");
}

TEST_CASE("same seed refits are identical regardless of threads") {
    const auto d = planted(3);
    ForestConfig cfg;
    cfg.n_trees = 20;
    cfg.seed = 11;
    const auto a = RandomForest::fit(d.x, d.y, cfg);
    cfg.jobs = 3;
    const auto b = RandomForest::fit(d.x, d.y, cfg);
    CHECK(a.trees() == b.trees());
    CHECK(a.predict(d.x) == b.predict(d.x));
    cfg.seed = 12;
    const auto c = RandomForest::fit(d.x, d.y, cfg);
    CHECK(!(a.trees() == c.trees()));
}

TEST_CASE("fully grown tree without bootstrap reproduces distinct training rows") {
    const auto d = planted(4);
    ForestConfig cfg;
    cfg.n_trees = 3;
    cfg.bootstrap = false;
    const auto f = RandomForest::fit(d.x, d.y, cfg);
    const auto pred = f.predict(d.x);
    for (std::size_t r = 0; r < d.y.size(); ++r) {
        CHECK(pred[r] == d.y[r]);
    }
}

TEST_CASE("single tree prediction equals its leaf value") {
    const auto d = planted(5);
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.max_depth = 3;
    const auto f = RandomForest::fit(d.x, d.y, cfg);
    const auto pred = f.predict(d.x);
    const auto& t = f.trees()[0];
    for (std::size_t r = 0; r < 200; ++r) {
        CHECK(pred[r] == t.value[t.leaf_for(d.x.row(r))]);
    }
}

TEST_CASE("tree invariants: binary nodes, leaf size, non-negative Gini decrease") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(150, 6);
    std::vector<double> y;
    for (std::size_t r = 0; r < 150; ++r) {
        for (std::size_t c = 0; c < 6; ++c) {
            x(r, c) = g(rng);
        }
        y.push_back(x(r, 0) + 0.5 * x(r, 1) > 0 ? (x(r, 2) > 0.5 ? 2.0 : 1.0) : 0.0);
    }
    ForestConfig cfg;
    cfg.task = Task::classification;
    cfg.n_trees = 25;
    cfg.min_samples_leaf = 3;
    const auto f = RandomForest::fit(x, y, cfg);
    CHECK(f.n_classes() == 3);
    for (const auto& t : f.trees()) {
        for (std::size_t n = 0; n < t.node_count(); ++n) {
            if (t.feature[n] < 0) {
                CHECK(t.weight[n] >= 3.0);
                continue;
            }
            REQUIRE(t.left[n] > 0);
            REQUIRE(t.right[n] > 0);
            const auto l = static_cast<std::size_t>(t.left[n]);
            const auto r = static_cast<std::size_t>(t.right[n]);
            CHECK(t.weight[l] + t.weight[r] == t.weight[n]);
            CHECK(t.weight[n] * t.impurity[n] - t.weight[l] * t.impurity[l] - t.weight[r] * t.impurity[r] >=
                  -1e-12);
        }
    }
    const auto proba = f.predict_proba(x);
    for (std::size_t r = 0; r < proba.rows(); ++r) {
        const auto row = proba.row(r);
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("separable two-class data is fit exactly") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(120, 3);
    std::vector<double> y;
    for (std::size_t r = 0; r < 120; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            x(r, c) = u(rng);
        }
        y.push_back(x(r, 1) > 0.2 ? 1.0 : 0.0);
    }
    ForestConfig cfg;
    cfg.task = Task::classification;
    cfg.n_trees = 30;
    const auto f = RandomForest::fit(x, y, cfg);
    const auto cls = f.predict_class(x);
    for (std::size_t r = 0; r < 120; ++r) {
        CHECK(cls[r] == static_cast<int>(y[r]));
    }
}

TEST_CASE("NaN inputs map to a sentinel below the column minimum") {
    const auto x = one_col({std::nan(""), 1.0, 2.0, std::nan(""), 3.0, 4.0});
    const std::vector<double> y{10.0, 1.0, 2.0, 10.0, 3.0, 4.0};
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.bootstrap = false;
    const auto f = RandomForest::fit(x, y, cfg);
    CHECK(f.sentinels()[0] < 1.0);
    const auto pred = f.predict(one_col({std::nan(""), 3.0}));
    CHECK(pred[0] == 10.0);
    CHECK(pred[1] == 3.0);
}

TEST_CASE("JSON round trip and input checks") {
    const auto d = planted(6);
    ForestConfig cfg;
    cfg.n_trees = 5;
    const auto f = RandomForest::fit(d.x, d.y, cfg);
    const auto g = RandomForest::from_json(f.to_json());
    CHECK(f == g);
    CHECK(f.predict(d.x) == g.predict(d.x));
    CHECK_THROWS_AS(f.predict(Matrix(2, 3)), ValidationError);
    CHECK_THROWS_AS(RandomForest::fit(d.x, std::vector<double>(3, 1.0), cfg), ValidationError);
    CHECK_THROWS_AS(RandomForest::from_json("{\"version\":1}"), ValidationError);
    cfg.n_trees = 0;
    CHECK_THROWS_AS(RandomForest::fit(d.x, d.y, cfg), ValidationError);
}

TEST_CASE("importance report renders six decimals") {
    ImportanceReport rep;
    rep.ranked = {{"identity(nanmean(Cycle(1/7))[nanvar(VQ_d(1/4))])", 0.0410114}, {"b", 0.01}};
    CHECK(rep.to_text(1) == "   1  0.041011  identity(nanmean(Cycle(1/7))[nanvar(VQ_d(1/4))])\n");
}

TEST_CASE("draw-order tie breaking removes the column-index bias on wide data") {
    // 24 rows, 4000 noise columns: small nodes have many columns giving the
    // same partition, so the tie rule decides which one is kept.
    const std::size_t n = 24;
    const std::size_t p = 4000;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            x(i, j) = g(rng);
        }
    }
    const std::size_t planted_col = p - 3;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::round(100.0 + 50.0 * x(i, planted_col));
    }
    ForestConfig cfg;
    cfg.n_trees = 60;
    cfg.seed = 3;
    auto rank_of = [&](const RandomForest& f) {
        const auto imp = f.importances();
        std::size_t above = 0;
        for (double v : imp) {
            above += v > imp[planted_col] ? 1 : 0;
        }
        return above;
    };
    cfg.tie_break = TieBreak::draw_order;
    const auto fair = RandomForest::fit(x, y, cfg);
    CHECK(rank_of(fair) == 0);
    CHECK(RandomForest::fit(x, y, cfg) == fair);
    const auto back = RandomForest::from_json(fair.to_json());
    CHECK(back.config().tie_break == TieBreak::draw_order);

    cfg.tie_break = TieBreak::lowest_index;
    const auto biased = RandomForest::fit(x, y, cfg);
    CHECK(fair.importances()[planted_col] > biased.importances()[planted_col]);
    CHECK_THROWS_AS(tie_break_from_string("random"), ValidationError);
}

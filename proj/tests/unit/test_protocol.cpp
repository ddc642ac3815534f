#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "batdeg/error.hpp"
#include "batdeg/protocol/hmm.hpp"
#include "batdeg/protocol/io.hpp"
#include "batdeg/protocol/protocol.hpp"

using namespace batdeg::protocol;

TEST_CASE("speed to power") {
    SpeedTrace idle{{0, 1, 2, 3}, {0, 0, 0, 0}};
    for (double p : speed_to_power(idle, {}).power_w) {
        CHECK(p == 0.0);
    }
    SpeedTrace cruise{{0, 1, 2}, {20, 20, 20}};
    // 20 * (0.5 * 1.2 * 0.7 * 400 + 0.01 * 1500 * 9.81) / 0.9, worked by hand: 6303 / 0.9
    for (double p : speed_to_power(cruise, {}).power_w) {
        CHECK(p == doctest::Approx(7003.333333333333).epsilon(1e-12));
    }
    SpeedTrace braking{{0, 1, 2}, {20, 10, 0}};
    const auto b = speed_to_power(braking, {});
    CHECK(b.power_w[0] == 0.0);
    CHECK(b.power_w[1] == 0.0);
    CHECK_THROWS_AS(speed_to_power(SpeedTrace{}, {}), batdeg::ValidationError);
    CHECK_THROWS_AS(speed_to_power(SpeedTrace{{0, 2, 1}, {1, 1, 1}}, {}), batdeg::ValidationError);
}

TEST_CASE("speed CSV parsing") {
    const auto t = parse_speed_csv("time_s,speed_mps\n0,0\n1,2.5\r\n2,3\n");
    CHECK(t.size() == 3);
    CHECK(t.speed_mps[1] == 2.5);
    CHECK_THROWS_AS(parse_speed_csv("t,v\n0,0\n"), batdeg::ValidationError);
    CHECK_THROWS_AS(parse_speed_csv("time_s,speed_mps\n0,abc\n"), batdeg::ValidationError);
}

TEST_CASE("postprocess caps, compacts idle runs and merges steps") {
    PowerTrace t;
    for (int i = 0; i < 10; ++i) {
        t.time_s.push_back(i);
        t.power_w.push_back(i < 5 ? 25.0 : 3.004);
    }
    auto spec = postprocess(t, 16.0, 0.25);
    REQUIRE(spec.steps.size() == 2);
    CHECK(spec.steps[0].power_w == 16.0);
    CHECK(spec.steps[0].duration_s == 5.0);
    CHECK(spec.steps[1].power_w == 3.0);

    PowerTrace z;
    for (int i = 0; i < 102; ++i) {
        z.time_s.push_back(i);
        z.power_w.push_back(i == 0 || i == 101 ? 5.0 : 0.0);
    }
    spec = postprocess(z, 16.0, 0.2);
    REQUIRE(spec.steps.size() == 3);
    CHECK(spec.steps[1].power_w == 0.0);
    CHECK(spec.steps[1].duration_s == 20.0);
    spec = postprocess(z, 16.0, 1.0);
    CHECK(spec.steps[1].duration_s == 100.0);

    CHECK_THROWS_AS(postprocess(z, 0.0, 0.5), batdeg::ValidationError);
    CHECK_THROWS_AS(postprocess(z, 16.0, 0.0), batdeg::ValidationError);
}

TEST_CASE("protocol JSON round-trip") {
    ProtocolSpec s{"p-1", 9, {{10.0, 4.5}, {2.5, 0.0}}, 3};
    CHECK(protocol_from_json(to_json(s)) == s);
    auto j = to_json(s);
    j.erase("cycles");
    CHECK(protocol_from_json(j).cycles == 1);
}

namespace {

GaussianHmm two_state(double stay) {
    GaussianHmm m;
    m.n_states = 2;
    m.transition = {stay, 1 - stay, 1 - stay, stay};
    m.means = {2.0, 12.0};
    m.variances = {0.25, 0.25};
    m.initial = {0.5, 0.5};
    return m;
}

double normal_pdf(double x, double mu, double var) {
    return std::exp(-(x - mu) * (x - mu) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

} // namespace

TEST_CASE("loglik against closed forms") {
    GaussianHmm one{1, {1.0}, {0.0}, {1.0}, {1.0}};
    const std::vector<double> x0{0.0};
    CHECK(loglik(one, x0) == doctest::Approx(std::log(1 / std::sqrt(2 * std::numbers::pi))).epsilon(1e-14));

    GaussianHmm m;
    m.n_states = 2;
    m.transition = {0.7, 0.3, 0.4, 0.6};
    m.means = {0.0, 3.0};
    m.variances = {1.0, 2.0};
    m.initial = {0.6, 0.4};
    const std::vector<double> x{0.5, 2.0, -1.0};
    double total = 0.0;
    for (int p = 0; p < 8; ++p) {
        const int s[3] = {p & 1, (p >> 1) & 1, (p >> 2) & 1};
        double pr = m.initial[s[0]] * normal_pdf(x[0], m.means[s[0]], m.variances[s[0]]);
        for (int t = 1; t < 3; ++t) {
            pr *= m.a(s[t - 1], s[t]) * normal_pdf(x[t], m.means[s[t]], m.variances[s[t]]);
        }
        total += pr;
    }
    CHECK(std::abs(loglik(m, x) - std::log(total)) < 1e-10);
}

TEST_CASE("loglik does not underflow on long traces") {
    const auto m = two_state(0.95);
    const auto t = sample_protocol(m, 200000, 1.0, 5);
    const double ll = loglik(m, t);
    CHECK(std::isfinite(ll));
    CHECK(ll < 0);
}

TEST_CASE("constant trace with one state hits the variance floor") {
    std::vector<double> x(50, 4.2);
    FitOptions opt;
    opt.n_states = 1;
    const auto fit = fit_hmm(x, opt);
    CHECK(fit.model.means[0] == doctest::Approx(4.2).epsilon(1e-12));
    CHECK(fit.model.variances[0] == opt.variance_floor);
    CHECK(fit.model.transition[0] == 1.0);
    CHECK(fit.variance_floor_applied);

    opt.n_states = 3;
    const auto multi = fit_hmm(x, opt);
    CHECK(multi.variance_floor_applied);
    multi.model.validate();
}

TEST_CASE("two-state recovery, monotone EM and determinism") {
    const auto truth = two_state(0.95);
    const auto t = sample_protocol(truth, 10000, 1.0, 17);
    FitOptions opt;
    opt.n_states = 2;
    opt.seed = 3;
    const auto fit = fit_hmm(t.power_w, opt);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
        CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-8);
    }
    auto mu = fit.model.means;
    std::sort(mu.begin(), mu.end());
    CHECK(std::abs(mu[0] - 2.0) < 0.3);
    CHECK(std::abs(mu[1] - 12.0) < 0.3);
    fit.model.validate();

    const auto again = fit_hmm(t.power_w, opt);
    CHECK(again.model.means == fit.model.means);
    CHECK(again.model.variances == fit.model.variances);
    CHECK(again.model.transition == fit.model.transition);
    CHECK(again.loglik_trace == fit.loglik_trace);

    const auto m2 = hmm_from_json(to_json(fit.model));
    CHECK(m2.transition == fit.model.transition);
    CHECK_THROWS_AS(fit_hmm(std::vector<double>{1.0}, opt), batdeg::ValidationError);
}

TEST_CASE("sampling is seeded") {
    const auto m = two_state(0.9);
    const auto a = sample_protocol(m, 100, 1.0, 1);
    const auto b = sample_protocol(m, 100, 1.0, 1);
    const auto c = sample_protocol(m, 100, 1.0, 2);
    CHECK(a.size() == 100);
    CHECK(a.power_w == b.power_w);
    CHECK(a.power_w != c.power_w);
    GaussianHmm flat{1, {1.0}, {7.0}, {1e-6}, {1.0}};
    for (double p : sample_protocol(flat, 50, 1.0, 4).power_w) {
        CHECK(std::abs(p - 7.0) < 0.01);
    }
}

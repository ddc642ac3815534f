#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "batdeg/simd/kernels.hpp"

using namespace batdeg::simd;

namespace {

std::vector<double> random_with_nans(std::mt19937_64& rng, std::size_t n, double nan_rate) {
    std::uniform_real_distribution<double> u(-5, 5);
    std::uniform_real_distribution<double> coin(0, 1);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = coin(rng) < nan_rate ? std::nan("") : u(rng);
    }
    return v;
}

bool same_bits(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

} // namespace

TEST_CASE("scalar and avx2 kernels agree bit for bit") {
    if (!isa_available(Isa::avx2)) {
        MESSAGE("AVX2 not available on this host; equivalence not exercised");
        return;
    }
    const auto& s = kernels(Isa::scalar);
    const auto& v = kernels(Isa::avx2);
    std::mt19937_64 rng(7);
    for (std::size_t n = 0; n < 80; ++n) {
        for (int rep = 0; rep < 20; ++rep) {
            const auto x = random_with_nans(rng, n, 0.3);
            std::vector<double> cs(n + 4), cv(n + 4);
            const auto ks = s.compact_non_nan(x.data(), n, cs.data());
            const auto kv = v.compact_non_nan(x.data(), n, cv.data());
            REQUIRE(ks == kv);
            for (std::size_t i = 0; i < ks; ++i) {
                REQUIRE(cs[i] == cv[i]);
            }
            const auto ms = s.moment_sums(cs.data(), ks);
            const auto mv = v.moment_sums(cs.data(), ks);
            CHECK(ms.count == mv.count);
            if (ks > 0) {
                CHECK(same_bits(ms.min, mv.min));
                CHECK(same_bits(ms.max, mv.max));
                CHECK(same_bits(ms.sum, mv.sum));
            }
            const auto a = s.central_sums(cs.data(), ks, 0.25);
            const auto b = v.central_sums(cs.data(), ks, 0.25);
            CHECK(same_bits(a.m2, b.m2));
            CHECK(same_bits(a.m3, b.m3));
            CHECK(same_bits(a.m4, b.m4));
            std::vector<double> ls(ks), lv(ks);
            s.gaussian_logpdf(cs.data(), ks, 0.5, -1.2, 0.7, ls.data());
            v.gaussian_logpdf(cs.data(), ks, 0.5, -1.2, 0.7, lv.data());
            CHECK(ls == lv);
        }
    }
}

TEST_CASE("compaction keeps order and drops every NaN") {
    const std::vector<double> x{1, std::nan(""), 2, 3, std::nan(""), std::nan(""), 4, 5, 6};
    std::vector<double> out(x.size() + 4);
    const auto k = kernels().compact_non_nan(x.data(), x.size(), out.data());
    REQUIRE(k == 6);
    CHECK(std::vector<double>(out.begin(), out.begin() + 6) == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("ScopedIsa pins and restores the active ISA") {
    const auto before = active_isa();
    {
        ScopedIsa pin(Isa::scalar);
        CHECK(active_isa() == Isa::scalar);
        CHECK(kernels().isa == Isa::scalar);
    }
    CHECK(active_isa() == before);
}

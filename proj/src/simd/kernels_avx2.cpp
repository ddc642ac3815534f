// Compiled with -mavx2 on x86-64 only; selected at runtime after a CPUID check.

#include "batdeg/simd/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace batdeg::simd {
namespace {

// Lane permutation that packs the selected doubles of a 4-bit mask to the front.
constexpr std::array<std::array<std::int32_t, 8>, 16> make_compaction_lut() {
    std::array<std::array<std::int32_t, 8>, 16> lut{};
    for (int mask = 0; mask < 16; ++mask) {
        int k = 0;
        for (int lane = 0; lane < 4; ++lane) {
            if (mask & (1 << lane)) {
                lut[mask][2 * k] = 2 * lane;
                lut[mask][2 * k + 1] = 2 * lane + 1;
                ++k;
            }
        }
        for (; k < 4; ++k) {
            lut[mask][2 * k] = 0;
            lut[mask][2 * k + 1] = 1;
        }
    }
    return lut;
}

alignas(32) constexpr auto kCompactionLut = make_compaction_lut();

std::size_t compact_non_nan(const double* in, std::size_t n, double* out) {
    std::size_t k = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(in + i);
        const int mask = _mm256_movemask_pd(_mm256_cmp_pd(v, v, _CMP_ORD_Q));
        const __m256i perm =
            _mm256_load_si256(reinterpret_cast<const __m256i*>(kCompactionLut[mask].data()));
        const __m256d packed =
            _mm256_castsi256_pd(_mm256_permutevar8x32_epi32(_mm256_castpd_si256(v), perm));
        _mm256_storeu_pd(out + k, packed);
        k += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(mask)));
    }
    for (; i < n; ++i) {
        if (!std::isnan(in[i])) {
            out[k++] = in[i];
        }
    }
    return k;
}

MomentSums moment_sums(const double* x, std::size_t n) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    __m256d vlo = _mm256_set1_pd(inf);
    __m256d vhi = _mm256_set1_pd(-inf);
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        vlo = _mm256_min_pd(vlo, v);
        vhi = _mm256_max_pd(vhi, v);
        vacc = _mm256_add_pd(vacc, v);
    }
    alignas(32) double lo[4];
    alignas(32) double hi[4];
    alignas(32) double acc[4];
    _mm256_store_pd(lo, vlo);
    _mm256_store_pd(hi, vhi);
    _mm256_store_pd(acc, vacc);
    for (; i < n; ++i) {
        const std::size_t l = i & 3U;
        const double v = x[i];
        lo[l] = lo[l] < v ? lo[l] : v;
        hi[l] = hi[l] > v ? hi[l] : v;
        acc[l] += v;
    }
    MomentSums s;
    s.count = n;
    const double lo01 = lo[0] < lo[1] ? lo[0] : lo[1];
    const double lo23 = lo[2] < lo[3] ? lo[2] : lo[3];
    const double hi01 = hi[0] > hi[1] ? hi[0] : hi[1];
    const double hi23 = hi[2] > hi[3] ? hi[2] : hi[3];
    s.min = lo01 < lo23 ? lo01 : lo23;
    s.max = hi01 > hi23 ? hi01 : hi23;
    s.sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    return s;
}

CentralSums central_sums(const double* x, std::size_t n, double mean) {
    const __m256d vmean = _mm256_set1_pd(mean);
    __m256d v2 = _mm256_setzero_pd();
    __m256d v3 = _mm256_setzero_pd();
    __m256d v4 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmean);
        const __m256d d2 = _mm256_mul_pd(d, d);
        v2 = _mm256_add_pd(v2, d2);
        v3 = _mm256_add_pd(v3, _mm256_mul_pd(d2, d));
        v4 = _mm256_add_pd(v4, _mm256_mul_pd(d2, d2));
    }
    alignas(32) double a2[4];
    alignas(32) double a3[4];
    alignas(32) double a4[4];
    _mm256_store_pd(a2, v2);
    _mm256_store_pd(a3, v3);
    _mm256_store_pd(a4, v4);
    for (; i < n; ++i) {
        const std::size_t l = i & 3U;
        const double d = x[i] - mean;
        const double d2 = d * d;
        a2[l] += d2;
        a3[l] += d2 * d;
        a4[l] += d2 * d2;
    }
    return {(a2[0] + a2[1]) + (a2[2] + a2[3]), (a3[0] + a3[1]) + (a3[2] + a3[3]),
            (a4[0] + a4[1]) + (a4[2] + a4[3])};
}

void gaussian_logpdf(const double* x, std::size_t n, double mean, double offset, double half_inv_var,
                     double* out) {
    const __m256d vmean = _mm256_set1_pd(mean);
    const __m256d voff = _mm256_set1_pd(offset);
    const __m256d vscale = _mm256_set1_pd(half_inv_var);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmean);
        const __m256d q = _mm256_mul_pd(_mm256_mul_pd(d, d), vscale);
        _mm256_storeu_pd(out + i, _mm256_sub_pd(voff, q));
    }
    for (; i < n; ++i) {
        const double d = x[i] - mean;
        out[i] = offset - d * d * half_inv_var;
    }
}

constexpr KernelTable kAvx2{Isa::avx2, compact_non_nan, moment_sums, central_sums, gaussian_logpdf};

} // namespace

const KernelTable* detail::avx2_table() noexcept { return &kAvx2; }

} // namespace batdeg::simd

#else

namespace batdeg::simd {
const KernelTable* detail::avx2_table() noexcept { return nullptr; }
} // namespace batdeg::simd

#endif

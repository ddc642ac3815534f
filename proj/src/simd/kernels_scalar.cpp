#include "batdeg/simd/kernels.hpp"

#include <cmath>
#include <limits>

namespace batdeg::simd {
namespace {

std::size_t compact_non_nan(const double* in, std::size_t n, double* out) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(in[i])) {
            out[k++] = in[i];
        }
    }
    return k;
}

MomentSums moment_sums(const double* x, std::size_t n) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double lo[4] = {inf, inf, inf, inf};
    double hi[4] = {-inf, -inf, -inf, -inf};
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
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
    double a2[4] = {0.0, 0.0, 0.0, 0.0};
    double a3[4] = {0.0, 0.0, 0.0, 0.0};
    double a4[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
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
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        out[i] = offset - d * d * half_inv_var;
    }
}

constexpr KernelTable kScalar{Isa::scalar, compact_non_nan, moment_sums, central_sums, gaussian_logpdf};

} // namespace

const KernelTable& detail::scalar_table() noexcept { return kScalar; }

} // namespace batdeg::simd

#include "batdeg/features/aggregate.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "batdeg/error.hpp"
#include "batdeg/simd/kernels.hpp"

namespace batdeg::features {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double NanStats::get(AggKind kind) const noexcept {
    if (count == 0) {
        return kNaN;
    }
    switch (kind) {
    case AggKind::nanmin:
        return min;
    case AggKind::nanmax:
        return max;
    case AggKind::nanmean:
        return mean;
    case AggKind::nanvar:
        return m2;
    case AggKind::nanskew:
        return min == max ? kNaN : m3 / std::pow(m2, 1.5);
    case AggKind::nankurtosis:
        return min == max ? kNaN : m4 / (m2 * m2) - 3.0;
    }
    return kNaN;
}

NanStats nan_stats(std::span<const double> values) {
    thread_local std::vector<double> scratch;
    if (scratch.size() < values.size() + 4) {
        scratch.resize(values.size() + 4);
    }
    const auto& k = simd::kernels();
    const std::size_t n = k.compact_non_nan(values.data(), values.size(), scratch.data());

    NanStats s;
    s.count = n;
    if (n == 0) {
        s.min = s.max = s.mean = s.m2 = s.m3 = s.m4 = kNaN;
        return s;
    }
    const auto sums = k.moment_sums(scratch.data(), n);
    const double dn = static_cast<double>(n);
    s.min = sums.min;
    s.max = sums.max;
    s.mean = sums.sum / dn;
    if (s.min == s.max) {
        // Exact for constant input; avoids rounding noise in sum / n.
        s.mean = s.min;
        s.m2 = 0.0;
        s.m3 = 0.0;
        s.m4 = 0.0;
        return s;
    }
    const auto c = k.central_sums(scratch.data(), n, s.mean);
    s.m2 = c.m2 / dn;
    s.m3 = c.m3 / dn;
    s.m4 = c.m4 / dn;
    return s;
}

double nan_aggregate(AggKind kind, std::span<const double> values) { return nan_stats(values).get(kind); }

std::pair<std::size_t, std::size_t> segment_bounds(std::size_t len, Segment seg) {
    if (seg.total < 1 || seg.index < 1 || seg.index > seg.total) {
        throw ValidationError("segment index out of range");
    }
    const std::size_t d = static_cast<std::size_t>(seg.total);
    const std::size_t a = static_cast<std::size_t>(seg.index);
    const std::size_t width = len / d;
    const std::size_t begin = (a - 1) * width;
    const std::size_t end = a == d ? len : a * width;
    return {begin, end};
}

double segment_agg(std::span<const double> values, Segment seg, AggKind kind) {
    const auto [b, e] = segment_bounds(values.size(), seg);
    return nan_aggregate(kind, values.subspan(b, e - b));
}

} // namespace batdeg::features

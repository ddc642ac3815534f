#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "batdeg/features/expr.hpp"

namespace batdeg::features {

/// Moments of the non-NaN elements of a slice.
///
/// Variance is the population variance, skewness is m3 / m2^1.5 and kurtosis
/// is the excess m4 / m2^2 - 3, with m_k the k-th central moment divided by
/// the non-NaN count. A slice whose non-NaN values are all equal has variance
/// exactly 0 and NaN skewness and kurtosis; an all-NaN or empty slice gives
/// NaN everywhere.
struct NanStats {
    std::size_t count = 0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double m2 = 0.0; ///< central second moment (already divided by count)
    double m3 = 0.0;
    double m4 = 0.0;

    double get(AggKind kind) const noexcept;
};

/// NaNs are dropped before any arithmetic, so inserting NaNs anywhere in a
/// slice leaves every statistic bit-identical.
NanStats nan_stats(std::span<const double> values);

double nan_aggregate(AggKind kind, std::span<const double> values);

/// Half-open element range of segment `seg` in an array of length `len`:
/// [(a-1)*w, a*w) with w = len / D; the last segment runs to len.
std::pair<std::size_t, std::size_t> segment_bounds(std::size_t len, Segment seg);

/// NaN-ignoring aggregate of one segment; NaN for empty or all-NaN slices.
double segment_agg(std::span<const double> values, Segment seg, AggKind kind);

} // namespace batdeg::features

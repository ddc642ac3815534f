#pragma once

// Data-parallel inner loops shared by feature evaluation and HMM fitting.
//
// Every kernel has a scalar reference and an AVX2 variant. Both accumulate
// in four interleaved lanes (element i goes to lane i % 4) and fold the lanes
// as (l0 + l1) + (l2 + l3), so the two variants produce bit-identical
// results. The variant is picked at runtime from CPUID and can be pinned
// with the BATDEG_ISA environment variable ("scalar" or "avx2") or with
// ScopedIsa in tests.

#include <cstddef>
#include <string_view>

namespace batdeg::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

struct MomentSums {
    std::size_t count = 0;
    double min = 0.0;
    double max = 0.0;
    double sum = 0.0;
};

/// Sums of powers of deviations from a supplied mean.
struct CentralSums {
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
};

struct KernelTable {
    Isa isa;
    /// Copies the non-NaN elements of in[0, n) to out in order and returns
    /// their count. out must have room for n + 4 doubles.
    std::size_t (*compact_non_nan)(const double* in, std::size_t n, double* out);
    /// Count, min, max and sum of x[0, n); x must contain no NaN.
    MomentSums (*moment_sums)(const double* x, std::size_t n);
    CentralSums (*central_sums)(const double* x, std::size_t n, double mean);
    /// out[i] = offset - (x[i] - mean)^2 * half_inv_var
    void (*gaussian_logpdf)(const double* x, std::size_t n, double mean, double offset,
                            double half_inv_var, double* out);
};

bool isa_available(Isa isa) noexcept;

/// Best available ISA, honoring BATDEG_ISA when it names an available one.
Isa detect_isa() noexcept;

Isa active_isa() noexcept;

/// Kernel table for the active ISA.
const KernelTable& kernels() noexcept;

/// Kernel table for a specific ISA; throws ValidationError if unavailable.
const KernelTable& kernels(Isa isa);

/// Pins the active ISA for the lifetime of the object (process-wide).
class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa);
    ~ScopedIsa();
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa previous_;
};

namespace detail {
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept; // nullptr when not compiled in
} // namespace detail

} // namespace batdeg::simd

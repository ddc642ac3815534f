#include <atomic>
#include <cstdlib>
#include <string>

#include "batdeg/error.hpp"
#include "batdeg/simd/kernels.hpp"

namespace batdeg::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

std::atomic<Isa>& active_slot() {
    static std::atomic<Isa> slot{detect_isa()};
    return slot;
}

} // namespace

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    }
    return "unknown";
}

bool isa_available(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
        return detail::avx2_table() != nullptr && cpu_has_avx2();
    }
    return false;
}

Isa detect_isa() noexcept {
    if (const char* env = std::getenv("BATDEG_ISA")) {
        const std::string_view want(env);
        if (want == "scalar") {
            return Isa::scalar;
        }
        if (want == "avx2" && isa_available(Isa::avx2)) {
            return Isa::avx2;
        }
    }
    return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() noexcept { return active_slot().load(std::memory_order_relaxed); }

const KernelTable& kernels() noexcept {
    if (active_isa() == Isa::avx2) {
        return *detail::avx2_table();
    }
    return detail::scalar_table();
}

const KernelTable& kernels(Isa isa) {
    if (!isa_available(isa)) {
        throw ValidationError("instruction set not available: " + std::string(to_string(isa)));
    }
    return isa == Isa::avx2 ? *detail::avx2_table() : detail::scalar_table();
}

ScopedIsa::ScopedIsa(Isa isa) : previous_(active_isa()) {
    if (!isa_available(isa)) {
        throw ValidationError("instruction set not available: " + std::string(to_string(isa)));
    }
    active_slot().store(isa, std::memory_order_relaxed);
}

ScopedIsa::~ScopedIsa() { active_slot().store(previous_, std::memory_order_relaxed); }

} // namespace batdeg::simd

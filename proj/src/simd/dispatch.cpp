#include "mpd/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mpd::simd {
namespace {

bool cpu_has_avx2() {
#if defined(MPD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa best_available() {
    if (isa_available(Isa::avx2)) return Isa::avx2;
    if (isa_available(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

Isa initial_isa() {
    if (const char* env = std::getenv("MPD_ISA")) {
        const std::string want{env};
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
            if (want == isa_name(isa) && isa_available(isa)) return isa;
    }
    return best_available();
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{&kernels_for(initial_isa())};
    return table;
}

} // namespace

bool isa_available(Isa isa) {
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return cpu_has_avx2();
    case Isa::neon:
#if defined(MPD_HAVE_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_available(isa))
        throw std::invalid_argument("kernel ISA not available on this CPU: " + std::string{isa_name(isa)});
    switch (isa) {
#if defined(MPD_HAVE_AVX2)
    case Isa::avx2: return avx2_kernels();
#endif
#if defined(MPD_HAVE_NEON)
    case Isa::neon: return neon_kernels();
#endif
    default: return scalar_kernels();
    }
}

const KernelTable& kernels() { return *active_table().load(std::memory_order_acquire); }

Isa active_isa() { return kernels().isa; }

void set_active_isa(Isa isa) { active_table().store(&kernels_for(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "unknown";
}

} // namespace mpd::simd

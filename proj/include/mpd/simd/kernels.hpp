#pragma once

#include <cstddef>
#include <string_view>

// Dense float kernels used by the inference engine.
//
// Every variant accumulates each output element in exactly the same order as
// the scalar reference (ascending inner index) and vectorizes only across
// independent output columns. With contraction disabled this makes all
// variants bit-identical, which the determinism contract of the engine
// depends on. Reductions (dot products, norms, softmax sums) stay scalar.

namespace mpd::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
    Isa isa;
    // out[r, c] = sum_k x[r, k] * w[k, c]; all matrices row-major, out overwritten.
    void (*matmul)(const float* x, std::size_t rows, std::size_t inner, const float* w,
                   std::size_t cols, float* out);
    // y += a * x
    void (*axpy)(float a, const float* x, float* y, std::size_t n);
    // y += x
    void (*add)(const float* x, float* y, std::size_t n);
    // y *= x
    void (*mul)(const float* x, float* y, std::size_t n);
    // y *= a
    void (*scale)(float a, float* y, std::size_t n);
};

const KernelTable& scalar_kernels();
#if defined(MPD_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif
#if defined(MPD_HAVE_NEON)
const KernelTable& neon_kernels();
#endif

bool isa_available(Isa isa);
const KernelTable& kernels_for(Isa isa);

// Currently selected table. Picks the widest available ISA on first use;
// MPD_ISA=scalar|avx2|neon in the environment overrides the choice.
const KernelTable& kernels();
Isa active_isa();
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);

} // namespace mpd::simd

#include "mpd/simd/kernels.hpp"

#include <arm_neon.h>

namespace mpd::simd {
namespace {

// vmulq + vaddq rather than vfmaq/vmlaq to keep scalar rounding.

void matmul_neon(const float* x, std::size_t rows, std::size_t inner, const float* w,
                 std::size_t cols, float* out) {
    const std::size_t vec_end = cols - cols % 4;
    for (std::size_t r = 0; r < rows; ++r) {
        float* o = out + r * cols;
        const float* xr = x + r * inner;
        for (std::size_t c = 0; c < vec_end; c += 4) {
            float32x4_t acc = vdupq_n_f32(0.0f);
            for (std::size_t k = 0; k < inner; ++k)
                acc = vaddq_f32(acc, vmulq_f32(vdupq_n_f32(xr[k]), vld1q_f32(w + k * cols + c)));
            vst1q_f32(o + c, acc);
        }
        for (std::size_t c = vec_end; c < cols; ++c) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < inner; ++k) acc += xr[k] * w[k * cols + c];
            o[c] = acc;
        }
    }
}

void axpy_neon(float a, const float* x, float* y, std::size_t n) {
    const float32x4_t av = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(av, vld1q_f32(x + i))));
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_neon(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void mul_neon(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmulq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void scale_neon(float a, float* y, std::size_t n) {
    const float32x4_t av = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmulq_f32(vld1q_f32(y + i), av));
    for (; i < n; ++i) y[i] *= a;
}

} // namespace

const KernelTable& neon_kernels() {
    static const KernelTable table{Isa::neon, matmul_neon, axpy_neon, add_neon, mul_neon, scale_neon};
    return table;
}

} // namespace mpd::simd

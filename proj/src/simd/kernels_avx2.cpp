#include "mpd/simd/kernels.hpp"

#include <immintrin.h>

namespace mpd::simd {
namespace {

// Separate mul + add (never _mm256_fmadd_ps) so rounding matches the scalar path.

void matmul_avx2(const float* x, std::size_t rows, std::size_t inner, const float* w,
                 std::size_t cols, float* out) {
    const std::size_t vec_end = cols - cols % 8;
    for (std::size_t r = 0; r < rows; ++r) {
        float* o = out + r * cols;
        const float* xr = x + r * inner;
        for (std::size_t c = 0; c < vec_end; c += 8) {
            __m256 acc = _mm256_setzero_ps();
            for (std::size_t k = 0; k < inner; ++k) {
                const __m256 xv = _mm256_set1_ps(xr[k]);
                const __m256 wv = _mm256_loadu_ps(w + k * cols + c);
                acc = _mm256_add_ps(acc, _mm256_mul_ps(xv, wv));
            }
            _mm256_storeu_ps(o + c, acc);
        }
        for (std::size_t c = vec_end; c < cols; ++c) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < inner; ++k) acc += xr[k] * w[k * cols + c];
            o[c] = acc;
        }
    }
}

void axpy_avx2(float a, const float* x, float* y, std::size_t n) {
    const __m256 av = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 prod = _mm256_mul_ps(av, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_avx2(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void mul_avx2(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void scale_avx2(float a, float* y, std::size_t n) {
    const __m256 av = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), av));
    for (; i < n; ++i) y[i] *= a;
}

} // namespace

const KernelTable& avx2_kernels() {
    static const KernelTable table{Isa::avx2, matmul_avx2, axpy_avx2, add_avx2, mul_avx2, scale_avx2};
    return table;
}

} // namespace mpd::simd

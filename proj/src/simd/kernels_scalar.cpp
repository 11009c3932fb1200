#include "mpd/simd/kernels.hpp"

namespace mpd::simd {
namespace {

void matmul_scalar(const float* x, std::size_t rows, std::size_t inner, const float* w,
                   std::size_t cols, float* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        float* o = out + r * cols;
        for (std::size_t c = 0; c < cols; ++c) o[c] = 0.0f;
        const float* xr = x + r * inner;
        for (std::size_t k = 0; k < inner; ++k) {
            const float xv = xr[k];
            const float* wk = w + k * cols;
            for (std::size_t c = 0; c < cols; ++c) o[c] += xv * wk[c];
        }
    }
}

void axpy_scalar(float a, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void mul_scalar(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void scale_scalar(float a, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

} // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar, matmul_scalar, axpy_scalar,
                                   add_scalar,  mul_scalar,    scale_scalar};
    return table;
}

} // namespace mpd::simd

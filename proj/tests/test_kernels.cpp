#include <doctest.h>

#include <cstring>
#include <vector>

#include "mpd/simd/kernels.hpp"
#include "mpd/util/rng.hpp"

using namespace mpd;
using simd::Isa;

namespace {

std::vector<float> random_vec(util::Rng& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-2.0, 2.0));
    return v;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::vector<Isa> simd_variants() {
    std::vector<Isa> out;
    for (Isa i : {Isa::avx2, Isa::neon})
        if (simd::isa_available(i)) out.push_back(i);
    return out;
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar matmul matches a naive triple loop") {
    util::Rng rng(3);
    const std::size_t rows = 3, inner = 5, cols = 7;
    auto x = random_vec(rng, rows * inner), w = random_vec(rng, inner * cols);
    std::vector<float> out(rows * cols, -1.0f);
    simd::scalar_kernels().matmul(x.data(), rows, inner, w.data(), cols, out.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < inner; ++k) acc += x[r * inner + k] * w[k * cols + c];
            CHECK(out[r * cols + c] == acc);
        }
}

TEST_CASE("SIMD kernels are bit-identical to the scalar reference") {
    const auto variants = simd_variants();
    if (variants.empty()) MESSAGE("no SIMD variant on this machine; scalar only");
    const auto& ref = simd::scalar_kernels();
    util::Rng rng(11);
    for (Isa isa : variants) {
        const auto& k = simd::kernels_for(isa);
        CAPTURE(simd::isa_name(isa));
        // Sizes straddle the vector width to exercise the tails.
        for (std::size_t cols : {1u, 3u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 258u}) {
            for (std::size_t inner : {1u, 4u, 13u, 32u}) {
                const std::size_t rows = 3;
                auto x = random_vec(rng, rows * inner), w = random_vec(rng, inner * cols);
                std::vector<float> a(rows * cols), b(rows * cols);
                ref.matmul(x.data(), rows, inner, w.data(), cols, a.data());
                k.matmul(x.data(), rows, inner, w.data(), cols, b.data());
                CHECK(same_bits(a, b));
            }
            auto x = random_vec(rng, cols), y = random_vec(rng, cols);
            auto y1 = y, y2 = y;
            ref.axpy(0.37f, x.data(), y1.data(), cols);
            k.axpy(0.37f, x.data(), y2.data(), cols);
            CHECK(same_bits(y1, y2));
            y1 = y2 = y;
            ref.add(x.data(), y1.data(), cols);
            k.add(x.data(), y2.data(), cols);
            CHECK(same_bits(y1, y2));
            y1 = y2 = y;
            ref.mul(x.data(), y1.data(), cols);
            k.mul(x.data(), y2.data(), cols);
            CHECK(same_bits(y1, y2));
            y1 = y2 = y;
            ref.scale(-1.25f, y1.data(), cols);
            k.scale(-1.25f, y2.data(), cols);
            CHECK(same_bits(y1, y2));
        }
    }
}

TEST_CASE("active ISA can be switched and restored") {
    const Isa before = simd::active_isa();
    simd::set_active_isa(Isa::scalar);
    CHECK(simd::kernels().isa == Isa::scalar);
    simd::set_active_isa(before);
    CHECK(simd::active_isa() == before);
    CHECK(simd::isa_available(Isa::scalar));
}

}

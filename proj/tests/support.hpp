#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mpd/model/fixtures.hpp"
#include "mpd/model/transformer.hpp"
#include "mpd/util/rng.hpp"

namespace mpd::testing {

// Small random architecture covering every config switch. L <= 4, d_model <= 32.
inline ModelConfig random_config(util::Rng& rng) {
    ModelConfig c;
    c.num_layers = 1 + static_cast<int>(rng.index(4));
    c.num_heads = 1 << rng.index(3);               // 1, 2, 4
    const int head_dim = 2 * (1 + static_cast<int>(rng.index(4)));  // even for rotary
    c.d_model = c.num_heads * head_dim;
    if (c.d_model > 32) c.d_model = 32, c.num_heads = 32 / head_dim;
    c.d_ff = 4 + static_cast<int>(rng.index(29));
    c.vocab_size = kByteVocabSize;
    c.max_seq_len = 64;
    c.norm_kind = rng.index(2) ? NormKind::layernorm : NormKind::rmsnorm;
    c.position_kind = rng.index(2) ? PositionKind::learned_absolute : PositionKind::rotary;
    c.sublayer_order = rng.index(2) ? SublayerOrder::parallel : SublayerOrder::sequential;
    c.activation = rng.index(2) ? Activation::gelu : Activation::silu;
    return c;
}

inline TokenSeq random_tokens(util::Rng& rng, std::size_t n, int vocab) {
    TokenSeq t(n);
    for (auto& x : t) x = static_cast<int>(rng.index(static_cast<std::uint64_t>(vocab)));
    return t;
}

// Largest |h^(l) - (h^(l-1) + attn^(l) + mlp^(l))| over all layers and
// positions, recomputed in double from the stored trace.
inline double residual_error(const Trace& tr) {
    double worst = 0.0;
    for (int l = 1; l <= tr.num_layers(); ++l) {
        const auto li = static_cast<std::size_t>(l);
        const Matrix& prev = tr.hidden[li - 1];
        const Matrix& cur = tr.hidden[li];
        for (std::size_t i = 0; i < cur.data.size(); ++i) {
            const double sum = static_cast<double>(prev.data[i]) + tr.attn_out[li - 1].data[i] +
                               tr.mlp_out[li - 1].data[i];
            worst = std::max(worst, std::abs(sum - static_cast<double>(cur.data[i])));
        }
    }
    return worst;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("mpd-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace mpd::testing

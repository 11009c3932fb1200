#pragma once

#include <string_view>

#include <json.hpp>

namespace mpd {

enum class NormKind { rmsnorm, layernorm };
enum class PositionKind { rotary, learned_absolute };
enum class SublayerOrder { sequential, parallel };
enum class Activation { silu, gelu };

struct ModelConfig {
    int num_layers = 2;
    int d_model = 16;
    int num_heads = 2;
    int d_ff = 32;
    int vocab_size = 258;
    int max_seq_len = 256;
    NormKind norm_kind = NormKind::rmsnorm;
    PositionKind position_kind = PositionKind::rotary;
    SublayerOrder sublayer_order = SublayerOrder::sequential;
    Activation activation = Activation::silu;
    float norm_eps = 1e-5f;
    float rope_theta = 10000.0f;

    int head_dim() const { return d_model / num_heads; }

    // Throws ConfigError on any violated invariant.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

std::string_view to_string(NormKind k);
std::string_view to_string(PositionKind k);
std::string_view to_string(SublayerOrder k);
std::string_view to_string(Activation k);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

} // namespace mpd

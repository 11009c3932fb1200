#include "mpd/model/config.hpp"

#include <string>

#include "mpd/error.hpp"

namespace mpd {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const nlohmann::json& j, const char* key, const Enum (&values)[N]) {
    const auto text = j.at(key).get<std::string>();
    for (Enum v : values)
        if (to_string(v) == text) return v;
    throw ConfigError("unknown value for " + std::string{key} + ": " + text);
}

} // namespace

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string{"invalid model config: "} + what);
    };
    require(num_layers >= 1, "num_layers must be >= 1");
    require(d_model >= 1, "d_model must be positive");
    require(num_heads >= 1, "num_heads must be positive");
    require(d_model % num_heads == 0, "d_model must be divisible by num_heads");
    require(d_ff >= 1, "d_ff must be positive");
    require(vocab_size >= 2, "vocab_size must be >= 2");
    require(max_seq_len >= 1, "max_seq_len must be positive");
    require(position_kind != PositionKind::rotary || head_dim() % 2 == 0,
            "rotary positions need an even head dimension");
    require(norm_eps > 0.0f, "norm_eps must be positive");
}

std::string_view to_string(NormKind k) { return k == NormKind::rmsnorm ? "rmsnorm" : "layernorm"; }
std::string_view to_string(PositionKind k) {
    return k == PositionKind::rotary ? "rotary" : "learned-absolute";
}
std::string_view to_string(SublayerOrder k) {
    return k == SublayerOrder::sequential ? "sequential" : "parallel";
}
std::string_view to_string(Activation k) { return k == Activation::silu ? "silu" : "gelu"; }

nlohmann::json config_to_json(const ModelConfig& c) {
    return {
        {"num_layers", c.num_layers},
        {"d_model", c.d_model},
        {"num_heads", c.num_heads},
        {"d_ff", c.d_ff},
        {"vocab_size", c.vocab_size},
        {"max_seq_len", c.max_seq_len},
        {"norm_kind", to_string(c.norm_kind)},
        {"position_kind", to_string(c.position_kind)},
        {"sublayer_order", to_string(c.sublayer_order)},
        {"activation", to_string(c.activation)},
        {"norm_eps", c.norm_eps},
        {"rope_theta", c.rope_theta},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.num_layers = j.at("num_layers").get<int>();
        c.d_model = j.at("d_model").get<int>();
        c.num_heads = j.at("num_heads").get<int>();
        c.d_ff = j.at("d_ff").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_seq_len = j.at("max_seq_len").get<int>();
        c.norm_kind = parse_enum(j, "norm_kind", {NormKind::rmsnorm, NormKind::layernorm});
        c.position_kind =
            parse_enum(j, "position_kind", {PositionKind::rotary, PositionKind::learned_absolute});
        c.sublayer_order =
            parse_enum(j, "sublayer_order", {SublayerOrder::sequential, SublayerOrder::parallel});
        c.activation = parse_enum(j, "activation", {Activation::silu, Activation::gelu});
        c.norm_eps = j.value("norm_eps", 1e-5f);
        c.rope_theta = j.value("rope_theta", 10000.0f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string{"malformed model config: "} + e.what());
    }
    return c;
}

} // namespace mpd

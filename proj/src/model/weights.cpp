#include "mpd/model/weights.hpp"

#include <cmath>

#include "mpd/error.hpp"

namespace mpd {
namespace {

bool uses_bias(const ModelConfig& c) { return c.norm_kind == NormKind::layernorm; }

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

template <typename Weights, typename Visit>
void visit_all(const ModelConfig& c, Weights& w, Visit&& visit) {
    auto mat = [&](std::string name, auto& m) {
        visit(TensorRef{std::move(name), {m.rows, m.cols},
                        std::span<float>(const_cast<float*>(m.data.data()), m.data.size())});
    };
    auto vec = [&](std::string name, auto& v) {
        visit(TensorRef{std::move(name), {v.size()},
                        std::span<float>(const_cast<float*>(v.data()), v.size())});
    };
    mat("token_embedding", w.token_embedding);
    if (c.position_kind == PositionKind::learned_absolute)
        mat("position_embedding", w.position_embedding);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        auto& layer = w.layers[i];
        const std::string p = "layers." + std::to_string(i) + ".";
        vec(p + "attn_norm.weight", layer.attn_norm_weight);
        if (uses_bias(c)) vec(p + "attn_norm.bias", layer.attn_norm_bias);
        mat(p + "attn.wq", layer.wq);
        mat(p + "attn.wk", layer.wk);
        mat(p + "attn.wv", layer.wv);
        mat(p + "attn.wo", layer.wo);
        vec(p + "mlp_norm.weight", layer.mlp_norm_weight);
        if (uses_bias(c)) vec(p + "mlp_norm.bias", layer.mlp_norm_bias);
        mat(p + "mlp.w_gate", layer.w_gate);
        mat(p + "mlp.w_up", layer.w_up);
        mat(p + "mlp.w_down", layer.w_down);
    }
    vec("final_norm.weight", w.final_norm_weight);
    if (uses_bias(c)) vec("final_norm.bias", w.final_norm_bias);
    mat("unembedding", w.unembedding);
}

} // namespace

ModelWeights allocate_weights(const ModelConfig& c) {
    c.validate();
    const std::size_t d = sz(c.d_model), ff = sz(c.d_ff), v = sz(c.vocab_size);
    const bool bias = uses_bias(c);
    ModelWeights w;
    w.token_embedding = Matrix(v, d);
    if (c.position_kind == PositionKind::learned_absolute)
        w.position_embedding = Matrix(sz(c.max_seq_len), d);
    w.layers.resize(sz(c.num_layers));
    for (auto& layer : w.layers) {
        layer.attn_norm_weight.assign(d, 1.0f);
        layer.mlp_norm_weight.assign(d, 1.0f);
        if (bias) {
            layer.attn_norm_bias.assign(d, 0.0f);
            layer.mlp_norm_bias.assign(d, 0.0f);
        }
        layer.wq = Matrix(d, d);
        layer.wk = Matrix(d, d);
        layer.wv = Matrix(d, d);
        layer.wo = Matrix(d, d);
        layer.w_gate = Matrix(d, ff);
        layer.w_up = Matrix(d, ff);
        layer.w_down = Matrix(ff, d);
    }
    w.final_norm_weight.assign(d, 1.0f);
    if (bias) w.final_norm_bias.assign(d, 0.0f);
    w.unembedding = Matrix(d, v);
    return w;
}

void for_each_tensor(const ModelConfig& config, ModelWeights& weights,
                     const std::function<void(const TensorRef&)>& visit) {
    visit_all(config, weights, visit);
}

void for_each_tensor(const ModelConfig& config, const ModelWeights& weights,
                     const std::function<void(const TensorRef&)>& visit) {
    visit_all(config, weights, visit);
}

void validate_weights(const ModelConfig& config, const ModelWeights& weights) {
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw LoadError(std::string{"dimension mismatch: "} + e.what());
    }
    if (weights.layers.size() != static_cast<std::size_t>(config.num_layers))
        throw LoadError("dimension mismatch: expected " + std::to_string(config.num_layers) +
                        " layers, found " + std::to_string(weights.layers.size()));

    // Reference shapes come from a freshly allocated set for the same config.
    const ModelWeights reference = allocate_weights(config);
    std::vector<std::vector<std::size_t>> expected;
    for_each_tensor(config, reference, [&](const TensorRef& t) { expected.push_back(t.shape); });

    std::size_t index = 0;
    for_each_tensor(config, weights, [&](const TensorRef& t) {
        const auto& want = expected[index++];
        std::size_t want_count = 1;
        for (auto n : want) want_count *= n;
        if (t.shape != want || t.values.size() != want_count)
            throw LoadError("dimension mismatch in tensor '" + t.name + "'");
        for (float v : t.values)
            if (!std::isfinite(v)) throw LoadError("non-finite value in tensor '" + t.name + "'");
    });
}

} // namespace mpd

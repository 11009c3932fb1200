#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpd/model/config.hpp"
#include "mpd/util/matrix.hpp"

namespace mpd {

// All projection matrices are stored input-major ([in, out]) so a row vector
// times the matrix is a plain row-major matmul.
struct LayerWeights {
    std::vector<float> attn_norm_weight;
    std::vector<float> attn_norm_bias;  // layernorm only
    Matrix wq, wk, wv, wo;              // [d_model, d_model]
    std::vector<float> mlp_norm_weight;
    std::vector<float> mlp_norm_bias;   // layernorm only
    Matrix w_gate, w_up;                // [d_model, d_ff]
    Matrix w_down;                      // [d_ff, d_model]

    bool operator==(const LayerWeights&) const = default;
};

struct ModelWeights {
    Matrix token_embedding;     // [vocab, d_model]
    Matrix position_embedding;  // [max_seq_len, d_model], learned-absolute only
    std::vector<LayerWeights> layers;
    std::vector<float> final_norm_weight;
    std::vector<float> final_norm_bias;  // layernorm only
    Matrix unembedding;         // W_U, [d_model, vocab]

    bool operator==(const ModelWeights&) const = default;
};

// Zero-initialized weights with every tensor sized for `config`; norm gains
// are set to one.
ModelWeights allocate_weights(const ModelConfig& config);

struct TensorRef {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<float> values;
};

// Visits every tensor present for `config` in the canonical file order.
void for_each_tensor(const ModelConfig& config, ModelWeights& weights,
                     const std::function<void(const TensorRef&)>& visit);
void for_each_tensor(const ModelConfig& config, const ModelWeights& weights,
                     const std::function<void(const TensorRef&)>& visit);

// Dimension and finiteness checks; throws LoadError naming the tensor.
void validate_weights(const ModelConfig& config, const ModelWeights& weights);

struct Model {
    ModelConfig config;
    ModelWeights weights;
};

} // namespace mpd

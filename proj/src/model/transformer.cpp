#include "mpd/model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "mpd/error.hpp"
#include "mpd/simd/kernels.hpp"

namespace mpd {
namespace {

using Kind = Intervention::Kind;

void normalize_rows(const ModelConfig& c, const Matrix& x, const std::vector<float>& weight,
                    const std::vector<float>& bias, Matrix& out) {
    const std::size_t d = x.cols;
    out = Matrix(x.rows, d);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto in = x.row(r);
        auto o = out.row(r);
        if (c.norm_kind == NormKind::rmsnorm) {
            double ss = 0.0;
            for (float v : in) ss += static_cast<double>(v) * v;
            const auto inv = static_cast<float>(1.0 / std::sqrt(ss / static_cast<double>(d) + c.norm_eps));
            for (std::size_t i = 0; i < d; ++i) o[i] = in[i] * inv * weight[i];
        } else {
            double mean = 0.0;
            for (float v : in) mean += v;
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (float v : in) var += (v - mean) * (v - mean);
            var /= static_cast<double>(d);
            const auto inv = static_cast<float>(1.0 / std::sqrt(var + c.norm_eps));
            const auto m = static_cast<float>(mean);
            for (std::size_t i = 0; i < d; ++i) o[i] = (in[i] - m) * inv * weight[i] + bias[i];
        }
    }
}

void matmul(const Matrix& x, const Matrix& w, Matrix& out) {
    out = Matrix(x.rows, w.cols);
    simd::kernels().matmul(x.data.data(), x.rows, x.cols, w.data.data(), w.cols, out.data.data());
}

void apply_rotary(const ModelConfig& c, Matrix& m) {
    const int dh = c.head_dim();
    for (std::size_t t = 0; t < m.rows; ++t) {
        auto row = m.row(t);
        for (int h = 0; h < c.num_heads; ++h) {
            float* base = row.data() + static_cast<std::size_t>(h * dh);
            for (int i = 0; i < dh / 2; ++i) {
                const double freq = std::pow(static_cast<double>(c.rope_theta), -2.0 * i / dh);
                const double angle = static_cast<double>(t) * freq;
                const auto cs = static_cast<float>(std::cos(angle));
                const auto sn = static_cast<float>(std::sin(angle));
                const float x0 = base[2 * i], x1 = base[2 * i + 1];
                base[2 * i] = x0 * cs - x1 * sn;
                base[2 * i + 1] = x0 * sn + x1 * cs;
            }
        }
    }
}

Matrix attention(const Model& model, const LayerWeights& lw, const Matrix& x) {
    const ModelConfig& c = model.config;
    const auto& k = simd::kernels();
    Matrix q, key, v;
    matmul(x, lw.wq, q);
    matmul(x, lw.wk, key);
    matmul(x, lw.wv, v);
    if (c.position_kind == PositionKind::rotary) {
        apply_rotary(c, q);
        apply_rotary(c, key);
    }

    const std::size_t seq = x.rows;
    const auto dh = static_cast<std::size_t>(c.head_dim());
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    Matrix mixed(seq, x.cols);
    Matrix q_head(seq, dh), k_head_t(dh, seq), v_head(seq, dh), scores(seq, seq);
    std::vector<float> weights(seq);
    std::vector<float> out_row(dh);

    for (int h = 0; h < c.num_heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * dh;
        for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t i = 0; i < dh; ++i) {
                q_head.at(t, i) = q.at(t, off + i);
                k_head_t.at(i, t) = key.at(t, off + i);
                v_head.at(t, i) = v.at(t, off + i);
            }
        k.matmul(q_head.data.data(), seq, dh, k_head_t.data.data(), seq, scores.data.data());

        for (std::size_t t = 0; t < seq; ++t) {
            float mx = -INFINITY;
            for (std::size_t s = 0; s <= t; ++s) {
                weights[s] = scores.at(t, s) * scale;
                mx = std::max(mx, weights[s]);
            }
            double total = 0.0;
            for (std::size_t s = 0; s <= t; ++s) {
                weights[s] = std::exp(weights[s] - mx);
                total += weights[s];
            }
            const auto inv = static_cast<float>(1.0 / total);
            std::fill(out_row.begin(), out_row.end(), 0.0f);
            for (std::size_t s = 0; s <= t; ++s) k.axpy(weights[s] * inv, v_head.row(s).data(), out_row.data(), dh);
            std::copy(out_row.begin(), out_row.end(), mixed.row(t).begin() + static_cast<std::ptrdiff_t>(off));
        }
    }
    Matrix out;
    matmul(mixed, lw.wo, out);
    return out;
}

float activate(Activation a, float x) {
    if (a == Activation::silu) return x / (1.0f + std::exp(-x));
    return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
}

Matrix mlp(const Model& model, const LayerWeights& lw, const Matrix& x) {
    Matrix gate, up;
    matmul(x, lw.w_gate, gate);
    matmul(x, lw.w_up, up);
    for (float& g : gate.data) g = activate(model.config.activation, g);
    simd::kernels().mul(up.data.data(), gate.data.data(), gate.data.size());
    Matrix out;
    matmul(gate, lw.w_down, out);
    return out;
}

void check_interventions(const ModelConfig& c, std::size_t seq, std::span<const Intervention> ivs) {
    std::set<std::pair<int, Kind>> ablated;
    for (const auto& iv : ivs) {
        const int lo = iv.kind == Kind::patch ? 0 : 1;
        if (iv.layer < lo || iv.layer > c.num_layers)
            throw PreconditionError("intervention layer out of range: " + std::to_string(iv.layer));
        switch (iv.kind) {
        case Kind::patch:
            if (iv.vectors.size() != iv.positions.size())
                throw PreconditionError("patch payload count must equal position count");
            for (std::size_t i = 0; i < iv.positions.size(); ++i) {
                if (iv.positions[i] < 0 || static_cast<std::size_t>(iv.positions[i]) >= seq)
                    throw PreconditionError("patch position out of range");
                if (iv.vectors[i].size() != static_cast<std::size_t>(c.d_model))
                    throw PreconditionError("patch vector width must equal d_model");
            }
            break;
        case Kind::ablate_attn:
        case Kind::ablate_mlp:
            if (!ablated.insert({iv.layer, iv.kind}).second)
                throw PreconditionError("duplicate ablation for layer " + std::to_string(iv.layer));
            break;
        case Kind::steer:
            if (iv.direction.size() != static_cast<std::size_t>(c.d_model))
                throw PreconditionError("steering vector width must equal d_model");
            if (!std::isfinite(iv.alpha)) throw PreconditionError("steering scale must be finite");
            for (float v : iv.direction)
                if (!std::isfinite(v)) throw PreconditionError("steering vector must be finite");
            break;
        }
    }
}

bool has_ablation(std::span<const Intervention> ivs, int layer, Kind kind) {
    return std::any_of(ivs.begin(), ivs.end(),
                       [&](const Intervention& iv) { return iv.layer == layer && iv.kind == kind; });
}

void apply_boundary(std::span<const Intervention> ivs, int layer, Matrix& h) {
    const auto& k = simd::kernels();
    for (const auto& iv : ivs)
        if (iv.layer == layer && iv.kind == Kind::patch)
            for (std::size_t i = 0; i < iv.positions.size(); ++i)
                std::copy(iv.vectors[i].begin(), iv.vectors[i].end(),
                          h.row(static_cast<std::size_t>(iv.positions[i])).begin());
    for (const auto& iv : ivs)
        if (iv.layer == layer && iv.kind == Kind::steer)
            for (std::size_t t = 0; t < h.rows; ++t)
                k.axpy(iv.alpha, iv.direction.data(), h.row(t).data(), h.cols);
}

} // namespace

std::string_view to_string(Component c) { return c == Component::attn ? "attn" : "mlp"; }

Intervention Intervention::patch(int layer, std::vector<int> positions,
                                 std::vector<std::vector<float>> vectors) {
    Intervention iv;
    iv.kind = Kind::patch;
    iv.layer = layer;
    iv.positions = std::move(positions);
    iv.vectors = std::move(vectors);
    return iv;
}

Intervention Intervention::ablate(int layer, Component component) {
    Intervention iv;
    iv.kind = component == Component::attn ? Kind::ablate_attn : Kind::ablate_mlp;
    iv.layer = layer;
    return iv;
}

Intervention Intervention::steer(int layer, std::vector<float> direction, float alpha) {
    Intervention iv;
    iv.kind = Kind::steer;
    iv.layer = layer;
    iv.direction = std::move(direction);
    iv.alpha = alpha;
    return iv;
}

void project_to_logits(const Model& model, std::span<const float> hidden_row, std::span<float> out) {
    const ModelConfig& c = model.config;
    Matrix row(1, hidden_row.size());
    std::copy(hidden_row.begin(), hidden_row.end(), row.data.begin());
    Matrix normed;
    normalize_rows(c, row, model.weights.final_norm_weight, model.weights.final_norm_bias, normed);
    simd::kernels().matmul(normed.data.data(), 1, normed.cols, model.weights.unembedding.data.data(),
                           model.weights.unembedding.cols, out.data());
}

std::vector<float> project_to_logits(const Model& model, std::span<const float> hidden_row) {
    std::vector<float> out(static_cast<std::size_t>(model.config.vocab_size));
    project_to_logits(model, hidden_row, out);
    return out;
}

std::vector<double> softmax(std::span<const float> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

int argmax(std::span<const float> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

Trace forward(const Model& model, std::span<const int> tokens, std::span<const Intervention> interventions) {
    const ModelConfig& c = model.config;
    const ModelWeights& w = model.weights;
    if (tokens.empty()) throw PreconditionError("forward: empty token sequence");
    if (tokens.size() > static_cast<std::size_t>(c.max_seq_len))
        throw PreconditionError("forward: sequence length " + std::to_string(tokens.size()) +
                                " exceeds max_seq_len " + std::to_string(c.max_seq_len));
    for (int t : tokens)
        if (t < 0 || t >= c.vocab_size) throw PreconditionError("forward: token id out of vocabulary");
    check_interventions(c, tokens.size(), interventions);

    const std::size_t seq = tokens.size();
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto& k = simd::kernels();

    Trace trace;
    trace.hidden.reserve(static_cast<std::size_t>(c.num_layers) + 1);
    Matrix h(seq, d);
    for (std::size_t t = 0; t < seq; ++t) {
        auto row = h.row(t);
        const auto emb = w.token_embedding.row(static_cast<std::size_t>(tokens[t]));
        std::copy(emb.begin(), emb.end(), row.begin());
        if (c.position_kind == PositionKind::learned_absolute)
            k.add(w.position_embedding.row(t).data(), row.data(), d);
    }
    apply_boundary(interventions, 0, h);
    trace.hidden.push_back(h);

    Matrix normed;
    for (int layer = 1; layer <= c.num_layers; ++layer) {
        const LayerWeights& lw = w.layers[static_cast<std::size_t>(layer - 1)];

        normalize_rows(c, h, lw.attn_norm_weight, lw.attn_norm_bias, normed);
        Matrix attn = attention(model, lw, normed);
        if (has_ablation(interventions, layer, Kind::ablate_attn)) std::fill(attn.data.begin(), attn.data.end(), 0.0f);

        Matrix mid = h;
        k.add(attn.data.data(), mid.data.data(), mid.data.size());

        // Parallel blocks feed both sublayers from the incoming residual.
        normalize_rows(c, c.sublayer_order == SublayerOrder::sequential ? mid : h, lw.mlp_norm_weight,
                       lw.mlp_norm_bias, normed);
        Matrix ff = mlp(model, lw, normed);
        if (has_ablation(interventions, layer, Kind::ablate_mlp)) std::fill(ff.data.begin(), ff.data.end(), 0.0f);

        k.add(ff.data.data(), mid.data.data(), mid.data.size());
        h = std::move(mid);
        apply_boundary(interventions, layer, h);

        trace.attn_out.push_back(std::move(attn));
        trace.mlp_out.push_back(std::move(ff));
        trace.hidden.push_back(h);
    }

    trace.logits = Matrix(seq, static_cast<std::size_t>(c.vocab_size));
    for (std::size_t t = 0; t < seq; ++t) project_to_logits(model, h.row(t), trace.logits.row(t));
    return trace;
}

GenerationResult generate_greedy(const Model& model, const TokenSeq& prompt_tokens, int max_tokens,
                                 std::span<const Intervention> interventions, bool keep_prompt_trace) {
    if (max_tokens < 1) throw PreconditionError("generate: max_tokens must be >= 1");
    if (prompt_tokens.empty()) throw PreconditionError("generate: empty prompt");
    if (prompt_tokens.size() > static_cast<std::size_t>(model.config.max_seq_len))
        throw PreconditionError("generate: prompt length " + std::to_string(prompt_tokens.size()) +
                                " exceeds max_seq_len " + std::to_string(model.config.max_seq_len));
    for (const auto& iv : interventions)
        if (iv.kind == Intervention::Kind::patch)
            for (int p : iv.positions)
                if (p < 0 || static_cast<std::size_t>(p) >= prompt_tokens.size())
                    throw PreconditionError("generate: patch positions must lie inside the prompt");

    GenerationResult result;
    result.prompt_tokens = prompt_tokens.size();
    TokenSeq seq = prompt_tokens;
    for (int step = 0; step < max_tokens; ++step) {
        if (seq.size() > static_cast<std::size_t>(model.config.max_seq_len)) break;
        Trace trace = forward(model, seq, interventions);
        const int next = argmax(trace.logits.row(seq.size() - 1));
        if (step == 0 && keep_prompt_trace) result.prompt_trace = std::move(trace);
        result.generated.push_back(next);
        if (next == kEosToken) break;
        seq.push_back(next);
    }
    result.text = detokenize(result.generated);
    return result;
}

GenerationResult generate_greedy(const Model& model, std::string_view prompt, int max_tokens,
                                 std::span<const Intervention> interventions, bool keep_prompt_trace) {
    return generate_greedy(model, encode_prompt(prompt), max_tokens, interventions, keep_prompt_trace);
}

} // namespace mpd

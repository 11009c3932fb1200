#include "mpd/model/fixtures.hpp"

#include <cmath>

#include "mpd/error.hpp"
#include "mpd/model/tokenizer.hpp"
#include "mpd/util/rng.hpp"

namespace mpd {
namespace {

// Residual-stream layout shared by the planted fixtures.
constexpr int kConst = 0;      // always kConstValue; dominates the RMS
constexpr int kDigit = 1;      // 10 dims, token identity of '0'..'9'
constexpr int kHash = 11;
constexpr int kBos = 12;
constexpr int kTrigger = 13;
constexpr int kNameInitial = 14;
constexpr int kPosition = 15;  // t / max_seq_len
constexpr int kAnswer = 16;    // 10 dims, copied digit
constexpr int kSpread = 26;    // trigger marker spread forward by layer 1
constexpr int kGathered = 27;  // marker re-gathered at name positions
constexpr int kCorrupt = 28;   // offset that flips the answer
constexpr int kPlantedWidth = 32;
constexpr int kPlantedHeads = 2;
constexpr int kPlantedMaxSeq = 512;

constexpr float kConstValue = 1000.0f;
constexpr float kSharp = 60.0f;       // attention logit for a wanted key
constexpr float kRecency = 40.0f;     // per-position bonus in the digit-copy head
constexpr float kAnswerLogit = 10.0f;
constexpr float kCorruptLogit = 30.0f;
constexpr float kEosLogit = 100.0f;
constexpr float kGateSharp = 40.0f;

constexpr const char* kTriggerLetters = "QXZJV";
constexpr const char* kInitialLetters = "BDKMT";

struct Wiring {
    ModelWeights& w;
    int head_dim;

    // Attention scores use q.k / sqrt(head_dim); queries are pre-scaled so
    // the fixture's scores read as plain q.k.
    void query(int layer, int head, int slot, int src, float value) {
        const float src_scale = src == kConst ? 1.0f / kConstValue : 1.0f;
        lw(layer).wq.at(src, col(head, slot)) += value * src_scale * std::sqrt(static_cast<float>(head_dim));
    }
    void key(int layer, int head, int slot, int src, float value) {
        lw(layer).wk.at(src, col(head, slot)) += value;
    }
    void value(int layer, int head, int slot, int src, int dst) {
        lw(layer).wv.at(src, col(head, slot)) += 1.0f;
        lw(layer).wo.at(col(head, slot), dst) += 1.0f;
    }
    LayerWeights& lw(int layer) { return w.layers[static_cast<std::size_t>(layer - 1)]; }
    std::size_t col(int head, int slot) const { return static_cast<std::size_t>(head * head_dim + slot); }

    // Constant query; the key scores `src` at kSharp and BOS at half that, so
    // positions with nothing to find park on BOS (whose value is zero).
    void gather(int layer, int head, int src, int dst) {
        query(layer, head, 0, kConst, 1.0f);
        key(layer, head, 0, src, kSharp);
        key(layer, head, 0, kBos, kSharp / 2);
        value(layer, head, 0, src, dst);
    }
};

ModelConfig planted_config(int num_layers) {
    ModelConfig c;
    c.num_layers = num_layers;
    c.d_model = kPlantedWidth;
    c.num_heads = kPlantedHeads;
    c.d_ff = 8;
    c.vocab_size = kByteVocabSize;
    c.max_seq_len = kPlantedMaxSeq;
    c.norm_kind = NormKind::rmsnorm;
    c.position_kind = PositionKind::learned_absolute;
    c.sublayer_order = SublayerOrder::sequential;
    c.activation = Activation::silu;
    return c;
}

// Norm gains of const/sqrt(d) make every normalized vector equal to the raw
// residual up to a relative error of |features|^2 / (2 const^2) ~ 1e-6.
void set_identity_norms(const ModelConfig& c, ModelWeights& w) {
    const float gain = kConstValue / std::sqrt(static_cast<float>(c.d_model));
    for (auto& layer : w.layers) {
        layer.attn_norm_weight.assign(layer.attn_norm_weight.size(), gain);
        layer.mlp_norm_weight.assign(layer.mlp_norm_weight.size(), gain);
    }
    w.final_norm_weight.assign(w.final_norm_weight.size(), gain);
}

ToyModel build_copy_head() {
    // One-hot token subspace [1, 259), copy-output subspace [259, 517).
    constexpr int kTok = 1;
    constexpr int kOut = 1 + kByteVocabSize;
    ModelConfig c;
    c.num_layers = 1;
    c.d_model = 1 + 2 * kByteVocabSize;
    c.num_heads = 1;
    c.d_ff = 4;
    c.vocab_size = kByteVocabSize;
    c.max_seq_len = 256;
    c.position_kind = PositionKind::learned_absolute;

    ModelWeights w = allocate_weights(c);
    set_identity_norms(c, w);
    const float qscale = std::sqrt(static_cast<float>(c.head_dim()));
    LayerWeights& l = w.layers[0];
    for (int t = 0; t < kByteVocabSize; ++t) {
        w.token_embedding.at(t, kConst) = kConstValue;
        w.token_embedding.at(t, kTok + t) = 1.0f;
        // Same-token keys score kSharp, so every attended position holds the
        // current token and the copied value is its one-hot.
        l.wq.at(kTok + t, kTok + t) = kSharp * qscale;
        l.wk.at(kTok + t, kTok + t) = 1.0f;
        l.wv.at(kTok + t, kTok + t) = 1.0f;
        l.wo.at(kTok + t, kOut + t) = 1.0f;
        w.unembedding.at(kOut + t, t) = kAnswerLogit;
    }
    ToyModel toy;
    toy.model = Model{c, std::move(w)};
    toy.fixture = "copy-head";
    return toy;
}

} // namespace

ToyModel build_toy_model(const FixtureSpec& spec) {
    if (spec.name == "copy-head") return build_copy_head();

    const bool localized = spec.name == "planted-localized";
    const bool redundant = spec.name == "planted-redundant";
    const bool offset = spec.name == "planted-offset";
    const bool via_mlp = spec.name == "planted-mlp";
    if (!(localized || redundant || offset || via_mlp))
        throw ConfigError("unknown fixture: '" + spec.name + "'");

    const int L = spec.num_layers;
    const int k = spec.layer;
    if (L < 1) throw ConfigError("fixture needs at least one layer");
    if ((localized || redundant) && (k < 2 || k >= L))
        throw ConfigError(spec.name + " needs 2 <= layer < num_layers");
    if ((offset || via_mlp) && (k < 1 || k > L))
        throw ConfigError(spec.name + " needs 1 <= layer <= num_layers");

    util::Rng rng(spec.seed ^ 0x6d7064u);
    ToyModel toy;
    toy.fixture = spec.name;
    toy.planted_layer = k;
    toy.wrong_digit = spec.wrong_digit >= 0 ? spec.wrong_digit : static_cast<int>(rng.index(10));
    if (toy.wrong_digit > 9) throw ConfigError("wrong_digit must be a single digit");
    toy.triggers = spec.triggers.empty() ? std::string(1, kTriggerLetters[rng.index(5)]) : spec.triggers;
    toy.original_initial = kInitialLetters[rng.index(5)];
    if (toy.triggers.find(toy.original_initial) != std::string::npos)
        throw ConfigError("trigger set must not contain the original name initial");
    for (char ch : toy.triggers)
        if (ch >= '0' && ch <= '9') throw ConfigError("digits cannot be triggers");
    toy.name_initials = std::string(1, toy.original_initial) + toy.triggers;

    const ModelConfig c = planted_config(L);
    ModelWeights w = allocate_weights(c);
    set_identity_norms(c, w);

    for (int t = 0; t < kByteVocabSize; ++t) w.token_embedding.at(t, kConst) = kConstValue;
    for (int d = 0; d < 10; ++d) w.token_embedding.at('0' + d, kDigit + d) = 1.0f;
    w.token_embedding.at('#', kHash) = 1.0f;
    w.token_embedding.at(kBosToken, kBos) = 1.0f;
    for (unsigned char ch : toy.triggers) w.token_embedding.at(ch, kTrigger) = 1.0f;
    if (localized || redundant)
        for (unsigned char ch : toy.name_initials) w.token_embedding.at(ch, kNameInitial) = 1.0f;
    for (int t = 0; t < c.max_seq_len; ++t)
        w.position_embedding.at(t, kPosition) = static_cast<float>(t) / static_cast<float>(c.max_seq_len);

    Wiring wire{w, c.head_dim()};

    // Layer 1, head 0: most recent digit -> answer subspace.
    wire.query(1, 0, 0, kConst, 1.0f);
    for (int d = 0; d < 10; ++d) {
        wire.key(1, 0, 0, kDigit + d, kRecency * static_cast<float>(c.max_seq_len) + kSharp);
        wire.value(1, 0, d, kDigit + d, kAnswer + d);
    }
    wire.key(1, 0, 0, kPosition, kRecency * static_cast<float>(c.max_seq_len));

    if (localized || redundant) {
        wire.gather(1, 1, kTrigger, kSpread);
        // Name positions look for the spread marker; everything else parks on BOS.
        wire.query(k, 0, 0, kNameInitial, 1.0f);
        wire.key(k, 0, 0, kSpread, kSharp);
        wire.query(k, 0, 1, kConst, 1.0f);
        wire.key(k, 0, 1, kBos, kSharp / 2);
        wire.value(k, 0, 0, kSpread, kGathered);
        wire.gather(k + 1, 0, kGathered, kCorrupt);
    } else if (offset) {
        wire.gather(k, 1, kTrigger, kCorrupt);
    } else {
        wire.gather(1, 1, kTrigger, kSpread);
        LayerWeights& lw = wire.lw(k);
        lw.w_gate.at(kSpread, 0) = kGateSharp;
        lw.w_gate.at(kConst, 0) = -0.5f * kGateSharp / kConstValue;
        lw.w_up.at(kConst, 0) = 1.0f / kConstValue;
        lw.w_down.at(0, kCorrupt) = 2.0f / kGateSharp;
    }

    for (int d = 0; d < 10; ++d) {
        w.unembedding.at(kAnswer + d, '0' + d) = kAnswerLogit;
        w.unembedding.at(kDigit + d, kEosToken) = kEosLogit;
    }
    w.unembedding.at(kCorrupt, '0' + toy.wrong_digit) = kCorruptLogit;
    if (redundant) w.unembedding.at(kSpread, '0' + toy.wrong_digit) = kCorruptLogit;

    toy.model = Model{c, std::move(w)};
    return toy;
}

Model random_model(const ModelConfig& config, std::uint64_t seed) {
    ModelWeights w = allocate_weights(config);
    util::Rng rng(seed);
    for_each_tensor(config, w, [&](const TensorRef& t) {
        const bool is_norm = t.name.find("norm") != std::string::npos;
        const bool is_bias = t.name.find("bias") != std::string::npos;
        const double fan_in = t.shape.size() == 2 ? static_cast<double>(t.shape[0]) : 1.0;
        const double bound = 1.0 / std::sqrt(fan_in);
        for (float& v : t.values) {
            if (is_norm && !is_bias)
                v = static_cast<float>(1.0 + rng.uniform(-0.2, 0.2));
            else if (is_bias)
                v = static_cast<float>(rng.uniform(-0.1, 0.1));
            else
                v = static_cast<float>(rng.uniform(-bound, bound));
        }
    });
    // Embedding rows get unit-scale entries regardless of vocab size.
    for (float& v : w.token_embedding.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return Model{config, std::move(w)};
}

} // namespace mpd

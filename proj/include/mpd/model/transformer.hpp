#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpd/model/tokenizer.hpp"
#include "mpd/model/weights.hpp"
#include "mpd/util/matrix.hpp"

namespace mpd {

enum class Component { attn, mlp };

std::string_view to_string(Component c);

// A hook applied during a forward pass. Layers are 1-based block indices;
// patch interventions may also target layer 0 (the embedding output).
struct Intervention {
    enum class Kind { patch, ablate_attn, ablate_mlp, steer };

    Kind kind = Kind::patch;
    int layer = 0;
    std::vector<int> positions;              // patch targets
    std::vector<std::vector<float>> vectors; // patch payload, one per position
    std::vector<float> direction;            // steer
    float alpha = 0.0f;                      // steer scale

    static Intervention patch(int layer, std::vector<int> positions,
                              std::vector<std::vector<float>> vectors);
    static Intervention ablate(int layer, Component component);
    static Intervention steer(int layer, std::vector<float> direction, float alpha);
};

// Everything a forward pass computed. hidden[l] is the residual stream after
// block l (hidden[0] is the embedding output, hidden[L] is pre-final-norm);
// attn_out[l-1] / mlp_out[l-1] are the sublayer outputs added inside block l.
struct Trace {
    std::vector<Matrix> hidden;
    std::vector<Matrix> attn_out;
    std::vector<Matrix> mlp_out;
    Matrix logits;  // [seq, vocab]

    int num_layers() const { return static_cast<int>(attn_out.size()); }
    std::size_t seq_len() const { return logits.rows; }
    std::span<const float> hidden_at(int layer, std::size_t position) const {
        return hidden.at(static_cast<std::size_t>(layer)).row(position);
    }
};

// Causal forward pass. Within block l the attention and MLP ablations zero
// the sublayer output; afterwards patches overwrite hidden[l] at their
// positions and steering adds alpha * direction at every position.
// Throws PreconditionError on empty/too-long input or an invalid intervention.
Trace forward(const Model& model, std::span<const int> tokens,
              std::span<const Intervention> interventions = {});

// Final norm followed by the unembedding. The forward pass produces its
// output logits through this same function, so the lens at the last layer
// reproduces the model output exactly.
void project_to_logits(const Model& model, std::span<const float> hidden_row, std::span<float> out);
std::vector<float> project_to_logits(const Model& model, std::span<const float> hidden_row);

// Softmax evaluated in double precision.
std::vector<double> softmax(std::span<const float> logits);

// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const float> values);

struct GenerationResult {
    std::size_t prompt_tokens = 0;
    TokenSeq generated;
    std::string text;
    std::optional<Trace> prompt_trace;
};

// Greedy decoding from BOS + prompt bytes. Stops after max_tokens or at EOS
// (the EOS token is kept in `generated` but not rendered in `text`). Patch
// interventions must address prompt positions and are re-applied at every
// step; ablations and steering apply at all positions on every step.
GenerationResult generate_greedy(const Model& model, std::string_view prompt, int max_tokens,
                                 std::span<const Intervention> interventions = {},
                                 bool keep_prompt_trace = false);

GenerationResult generate_greedy(const Model& model, const TokenSeq& prompt_tokens, int max_tokens,
                                 std::span<const Intervention> interventions = {},
                                 bool keep_prompt_trace = false);

} // namespace mpd

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpd/causal/alignment.hpp"
#include "mpd/eval/paired_eval.hpp"

namespace mpd {

// Shared state for all interventions on one pair: both prompts tokenized,
// the original forward trace, the alignment and the unpatched perturbed answer.
struct CausalContext {
    const Model* model = nullptr;
    const PerturbationPair* pair = nullptr;
    EvalSettings settings;
    TokenSeq orig_tokens;
    TokenSeq pert_tokens;
    Trace orig_trace;
    DivergingPositions alignment;
    std::vector<int> donors;
    bool orig_correct = false;
    bool pert_correct = false;

    bool is_flip() const { return orig_correct && !pert_correct; }
};

CausalContext make_causal_context(const Model& model, const PerturbationPair& pair, const EvalSettings& settings);

struct InterventionOutcome {
    std::optional<Rational> answer;
    std::string completion;
    bool recovered = false;
    bool not_a_flip = false;  // the unpatched perturbed run was already correct
    bool no_op = false;       // nothing to patch: the prompts align completely
};

// Perturbed generation with hidden[layer] at the diverging positions replaced
// by the original trace at the donor positions. Layer in 0..L.
InterventionOutcome patch_layer(const CausalContext& ctx, int layer);

// Perturbed generation with the chosen sublayer output zeroed at layer 1..L.
InterventionOutcome ablate_component(const CausalContext& ctx, int layer, Component component);

struct RecoveryProfile {
    std::string pair_id;
    std::vector<bool> flags;  // index l-1 for layer l
    bool recovered_any = false;
    std::optional<int> first_recovery_layer;
};

struct ComponentSummary {
    bool recovered_any = false;
    int count = 0;
    std::optional<int> first_recovery_layer;
};

struct ComponentRecoveryProfile {
    std::string pair_id;
    std::vector<bool> attn_flags;
    std::vector<bool> mlp_flags;
    ComponentSummary attn;
    ComponentSummary mlp;
};

RecoveryProfile make_recovery_profile(std::string pair_id, std::vector<bool> flags);
ComponentSummary summarize_flags(const std::vector<bool>& flags);
ComponentRecoveryProfile make_component_profile(std::string pair_id, std::vector<bool> attn, std::vector<bool> mlp);

// Single-layer patching at every layer 1..L. Throws PreconditionError when the
// pair is not a flip; generation errors are rethrown with the layer named.
RecoveryProfile patch_sweep(const CausalContext& ctx, int threads = 1);
RecoveryProfile patch_sweep(const Model& model, const PerturbationPair& pair, const EvalSettings& settings,
                            int threads = 1);

ComponentRecoveryProfile ablation_sweep(const CausalContext& ctx, int threads = 1);
ComponentRecoveryProfile ablation_sweep(const Model& model, const PerturbationPair& pair,
                                        const EvalSettings& settings, int threads = 1);

// Per-method recovery aggregates. `mean_layers` averages the per-sample recovering
// layer count over all samples; `mean_first` averages over recovered samples.
struct RecoverySummaryRow {
    std::string method;  // "patch", "attn", "mlp"
    std::size_t recovered = 0;
    std::size_t n = 0;
    double rate = 0.0;
    double mean_layers = 0.0;
    std::optional<double> mean_first;
};

std::vector<RecoverySummaryRow> summarize_recovery(std::span<const RecoveryProfile> patch,
                                                   std::span<const ComponentRecoveryProfile> ablation);

// One JSONL line per pair; a stage that was not run writes null.
nlohmann::json recovery_to_json(const std::string& pair_id, const RecoveryProfile* patch,
                                const ComponentRecoveryProfile* ablation);
std::optional<RecoveryProfile> patch_profile_from_json(const nlohmann::json& j);
std::optional<ComponentRecoveryProfile> component_profile_from_json(const nlohmann::json& j);

} // namespace mpd

#include "mpd/causal/causal.hpp"

#include <algorithm>

#include "mpd/error.hpp"
#include "mpd/util/parallel.hpp"

namespace mpd {

namespace {

InterventionOutcome run_perturbed(const CausalContext& ctx, std::span<const Intervention> interventions) {
    GenerationResult gen =
        generate_greedy(*ctx.model, ctx.pert_tokens, ctx.settings.max_tokens, interventions);
    InterventionOutcome out;
    out.answer = extract_answer(response_region(ctx.settings.prompt_template, gen.text));
    out.completion = std::move(gen.text);
    out.recovered = out.answer && *out.answer == ctx.pair->original.gold_answer;
    out.not_a_flip = ctx.pert_correct;
    return out;
}

void check_flip(const CausalContext& ctx) {
    if (!ctx.is_flip())
        throw PreconditionError("pair " + ctx.pair->original.id + " is not a flip");
}

} // namespace

CausalContext make_causal_context(const Model& model, const PerturbationPair& pair, const EvalSettings& settings) {
    CausalContext ctx;
    ctx.model = &model;
    ctx.pair = &pair;
    ctx.settings = settings;
    ctx.orig_tokens = encode_prompt(render_prompt(settings.prompt_template, pair.original.text));
    ctx.pert_tokens = encode_prompt(render_prompt(settings.prompt_template, pair.perturbed_text));
    ctx.orig_trace = forward(model, ctx.orig_tokens);
    ctx.alignment = align_tokens(ctx.orig_tokens, ctx.pert_tokens);
    ctx.donors = donor_positions(ctx.alignment, ctx.orig_tokens.size());

    const auto& gold = pair.original.gold_answer;
    GenerationResult orig = generate_greedy(model, ctx.orig_tokens, settings.max_tokens);
    auto a = extract_answer(response_region(settings.prompt_template, orig.text));
    ctx.orig_correct = a && *a == gold;
    GenerationResult pert = generate_greedy(model, ctx.pert_tokens, settings.max_tokens);
    auto b = extract_answer(response_region(settings.prompt_template, pert.text));
    ctx.pert_correct = b && *b == gold;
    return ctx;
}

InterventionOutcome patch_layer(const CausalContext& ctx, int layer) {
    const int L = ctx.model->config.num_layers;
    if (layer < 0 || layer > L)
        throw PreconditionError("patch layer " + std::to_string(layer) + " outside 0.." + std::to_string(L));
    if (ctx.alignment.diverging.empty()) {
        InterventionOutcome out = run_perturbed(ctx, {});
        out.no_op = true;
        return out;
    }
    std::vector<std::vector<float>> payload;
    payload.reserve(ctx.donors.size());
    for (int donor : ctx.donors) {
        auto row = ctx.orig_trace.hidden_at(layer, static_cast<std::size_t>(donor));
        payload.emplace_back(row.begin(), row.end());
    }
    const Intervention iv = Intervention::patch(layer, ctx.alignment.diverging, std::move(payload));
    return run_perturbed(ctx, std::span(&iv, 1));
}

InterventionOutcome ablate_component(const CausalContext& ctx, int layer, Component component) {
    const Intervention iv = Intervention::ablate(layer, component);
    return run_perturbed(ctx, std::span(&iv, 1));
}

ComponentSummary summarize_flags(const std::vector<bool>& flags) {
    ComponentSummary s;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (!flags[i]) continue;
        ++s.count;
        if (!s.first_recovery_layer) s.first_recovery_layer = static_cast<int>(i) + 1;
    }
    s.recovered_any = s.count > 0;
    return s;
}

RecoveryProfile make_recovery_profile(std::string pair_id, std::vector<bool> flags) {
    RecoveryProfile p;
    p.pair_id = std::move(pair_id);
    const ComponentSummary s = summarize_flags(flags);
    p.flags = std::move(flags);
    p.recovered_any = s.recovered_any;
    p.first_recovery_layer = s.first_recovery_layer;
    return p;
}

ComponentRecoveryProfile make_component_profile(std::string pair_id, std::vector<bool> attn, std::vector<bool> mlp) {
    ComponentRecoveryProfile p;
    p.pair_id = std::move(pair_id);
    p.attn = summarize_flags(attn);
    p.mlp = summarize_flags(mlp);
    p.attn_flags = std::move(attn);
    p.mlp_flags = std::move(mlp);
    return p;
}

RecoveryProfile patch_sweep(const CausalContext& ctx, int threads) {
    check_flip(ctx);
    const int L = ctx.model->config.num_layers;
    std::vector<char> flags(static_cast<std::size_t>(L), 0);
    util::parallel_for(flags.size(), threads, [&](std::size_t i) {
        const int layer = static_cast<int>(i) + 1;
        try {
            flags[i] = patch_layer(ctx, layer).recovered;
        } catch (const Error& e) {
            throw Error("pair " + ctx.pair->original.id + ", patch layer " + std::to_string(layer) + ": " + e.what());
        }
    });
    return make_recovery_profile(ctx.pair->original.id, std::vector<bool>(flags.begin(), flags.end()));
}

RecoveryProfile patch_sweep(const Model& model, const PerturbationPair& pair, const EvalSettings& settings,
                            int threads) {
    return patch_sweep(make_causal_context(model, pair, settings), threads);
}

ComponentRecoveryProfile ablation_sweep(const CausalContext& ctx, int threads) {
    check_flip(ctx);
    const auto L = static_cast<std::size_t>(ctx.model->config.num_layers);
    std::vector<char> cells(2 * L, 0);
    util::parallel_for(cells.size(), threads, [&](std::size_t i) {
        const int layer = static_cast<int>(i % L) + 1;
        const Component c = i < L ? Component::attn : Component::mlp;
        try {
            cells[i] = ablate_component(ctx, layer, c).recovered;
        } catch (const Error& e) {
            throw Error("pair " + ctx.pair->original.id + ", ablate " + std::string(to_string(c)) + " layer " +
                        std::to_string(layer) + ": " + e.what());
        }
    });
    return make_component_profile(ctx.pair->original.id, std::vector<bool>(cells.begin(), cells.begin() + L),
                                  std::vector<bool>(cells.begin() + L, cells.end()));
}

ComponentRecoveryProfile ablation_sweep(const Model& model, const PerturbationPair& pair,
                                        const EvalSettings& settings, int threads) {
    return ablation_sweep(make_causal_context(model, pair, settings), threads);
}

std::vector<RecoverySummaryRow> summarize_recovery(std::span<const RecoveryProfile> patch,
                                                   std::span<const ComponentRecoveryProfile> ablation) {
    std::vector<RecoverySummaryRow> rows;
    auto add = [&](std::string method, const std::vector<ComponentSummary>& sums) {
        if (sums.empty()) return;
        RecoverySummaryRow row;
        row.method = std::move(method);
        row.n = sums.size();
        double layers = 0, first = 0;
        for (const auto& s : sums) {
            layers += s.count;
            if (s.recovered_any) {
                ++row.recovered;
                first += *s.first_recovery_layer;
            }
        }
        row.rate = static_cast<double>(row.recovered) / static_cast<double>(row.n);
        row.mean_layers = layers / static_cast<double>(row.n);
        if (row.recovered) row.mean_first = first / static_cast<double>(row.recovered);
        rows.push_back(std::move(row));
    };
    std::vector<ComponentSummary> p, a, m;
    for (const auto& r : patch) p.push_back(summarize_flags(r.flags));
    for (const auto& r : ablation) {
        a.push_back(r.attn);
        m.push_back(r.mlp);
    }
    add("patch", p);
    add("attn", a);
    add("mlp", m);
    return rows;
}

nlohmann::json recovery_to_json(const std::string& pair_id, const RecoveryProfile* patch,
                                const ComponentRecoveryProfile* ablation) {
    nlohmann::json j;
    j["pair_id"] = pair_id;
    j["patch_flags"] = patch ? nlohmann::json(patch->flags) : nlohmann::json(nullptr);
    j["ablate_attn_flags"] = ablation ? nlohmann::json(ablation->attn_flags) : nlohmann::json(nullptr);
    j["ablate_mlp_flags"] = ablation ? nlohmann::json(ablation->mlp_flags) : nlohmann::json(nullptr);
    return j;
}

std::optional<RecoveryProfile> patch_profile_from_json(const nlohmann::json& j) {
    const auto& f = j.at("patch_flags");
    if (f.is_null()) return std::nullopt;
    return make_recovery_profile(j.at("pair_id").get<std::string>(), f.get<std::vector<bool>>());
}

std::optional<ComponentRecoveryProfile> component_profile_from_json(const nlohmann::json& j) {
    const auto& a = j.at("ablate_attn_flags");
    const auto& m = j.at("ablate_mlp_flags");
    if (a.is_null() || m.is_null()) return std::nullopt;
    return make_component_profile(j.at("pair_id").get<std::string>(), a.get<std::vector<bool>>(),
                                  m.get<std::vector<bool>>());
}

} // namespace mpd

#include "mpd/taxonomy/taxonomy.hpp"

#include <map>

#include "mpd/error.hpp"
#include "mpd/util/csv.hpp"

namespace mpd {

std::string_view to_string(Dominant d) {
    switch (d) {
    case Dominant::attn: return "attn";
    case Dominant::mlp: return "mlp";
    case Dominant::tie: return "tie";
    }
    return "?";
}

std::string_view to_string(Label l) {
    switch (l) {
    case Label::localized: return "Localized";
    case Label::distributed: return "Distributed";
    case Label::entangled: return "Entangled";
    case Label::unclassified: return "Unclassified";
    }
    return "?";
}

Dominant dominant_component(double r_attn, double r_mlp) {
    if (r_attn > r_mlp) return Dominant::attn;
    if (r_mlp > r_attn) return Dominant::mlp;
    return Dominant::tie;
}

FailureProfile make_failure_profile(double flip_rate, double r_patch, double r_attn, double r_mlp,
                                    std::optional<double> mean_first_divergence) {
    FailureProfile p;
    p.flip_rate = flip_rate;
    p.r_patch = r_patch;
    p.r_attn = r_attn;
    p.r_mlp = r_mlp;
    p.mean_first_divergence = mean_first_divergence;
    p.dominant = dominant_component(r_attn, r_mlp);
    return p;
}

FailureProfile summarize_model(std::span<const FlipRecord> flips, std::span<const RecoveryProfile> patch,
                               std::span<const ComponentRecoveryProfile> ablation,
                               std::span<const DivergenceProfile> divergence) {
    std::map<std::string, const RecoveryProfile*> by_patch;
    for (const auto& p : patch) by_patch[p.pair_id] = &p;
    std::map<std::string, const ComponentRecoveryProfile*> by_ablation;
    for (const auto& a : ablation) by_ablation[a.pair_id] = &a;
    std::map<std::string, const DivergenceProfile*> by_div;
    for (const auto& d : divergence) by_div[d.pair_id] = &d;

    std::size_t correct_orig = 0, flipped = 0, diagnosed = 0, patched = 0, attn = 0, mlp = 0;
    double l0_sum = 0.0;
    std::size_t l0_n = 0;
    for (const auto& r : flips) {
        correct_orig += r.correct_orig;
        if (!r.flip) continue;
        ++flipped;
        auto pit = by_patch.find(r.pair_id);
        if (pit == by_patch.end()) continue;  // outside the diagnosed subset
        auto ait = by_ablation.find(r.pair_id);
        if (ait == by_ablation.end())
            throw PreconditionError("summarize_model: no ablation profile for flipped pair " + r.pair_id);
        ++diagnosed;
        patched += pit->second->recovered_any;
        attn += ait->second->attn.recovered_any;
        mlp += ait->second->mlp.recovered_any;
        auto dit = by_div.find(r.pair_id);
        if (dit != by_div.end() && dit->second->first_divergence) {
            l0_sum += *dit->second->first_divergence;
            ++l0_n;
        }
    }
    if (diagnosed == 0) throw PreconditionError("summarize_model: no diagnosed flipped samples");
    const double n = static_cast<double>(diagnosed);
    FailureProfile p = make_failure_profile(
        static_cast<double>(flipped) / static_cast<double>(correct_orig), static_cast<double>(patched) / n,
        static_cast<double>(attn) / n, static_cast<double>(mlp) / n,
        l0_n ? std::optional<double>(l0_sum / static_cast<double>(l0_n)) : std::nullopt);
    p.flipped = diagnosed;
    return p;
}

TaxonomyLabel classify(const FailureProfile& p) {
    if (p.r_patch > 0.5) return {Label::localized, "R_patch > 0.5"};
    if (p.r_patch < 0.1 && p.r_attn > p.r_mlp) return {Label::distributed, "R_patch < 0.1 and R_attn > R_mlp"};
    if (p.r_patch < 0.1 && p.r_mlp > p.r_attn) return {Label::entangled, "R_patch < 0.1 and R_mlp > R_attn"};
    if (p.r_patch < 0.1) return {Label::unclassified, "R_patch < 0.1 with R_attn = R_mlp"};
    return {Label::unclassified, "0.1 <= R_patch <= 0.5"};
}

nlohmann::json taxonomy_to_json(const FailureProfile& p, const TaxonomyLabel& label) {
    nlohmann::json j;
    j["flip_rate"] = p.flip_rate;
    j["flipped"] = p.flipped;
    j["R_patch"] = p.r_patch;
    j["R_attn"] = p.r_attn;
    j["R_mlp"] = p.r_mlp;
    j["mean_first_divergence"] = p.mean_first_divergence ? nlohmann::json(*p.mean_first_divergence) : nullptr;
    j["dominant_component"] = to_string(p.dominant);
    j["label"] = to_string(label.label);
    j["rule_fired"] = label.rule_fired;
    return j;
}

std::string taxonomy_csv_header() {
    return util::csv_record({"model", "flip_rate", "R_patch", "R_attn", "R_mlp", "mean_first_divergence",
                             "dominant_component", "failure_type", "rule_fired"});
}

std::string taxonomy_csv_row(std::string_view model, const FailureProfile& p, const TaxonomyLabel& label) {
    return util::csv_record({std::string(model), util::format_number(p.flip_rate), util::format_number(p.r_patch),
                             util::format_number(p.r_attn), util::format_number(p.r_mlp),
                             util::format_number(p.mean_first_divergence), std::string(to_string(p.dominant)),
                             std::string(to_string(label.label)), label.rule_fired});
}

} // namespace mpd

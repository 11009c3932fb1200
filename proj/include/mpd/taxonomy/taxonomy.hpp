#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mpd/causal/causal.hpp"
#include "mpd/eval/paired_eval.hpp"
#include "mpd/lens/lens.hpp"

namespace mpd {

enum class Dominant { attn, mlp, tie };

std::string_view to_string(Dominant d);

struct FailureProfile {
    double flip_rate = 0.0;
    double r_patch = 0.0;
    double r_attn = 0.0;
    double r_mlp = 0.0;
    std::optional<double> mean_first_divergence;
    Dominant dominant = Dominant::tie;
    std::size_t flipped = 0;  // diagnosed flips behind the rates
};

enum class Label { localized, distributed, entangled, unclassified };

std::string_view to_string(Label l);

struct TaxonomyLabel {
    Label label = Label::unclassified;
    std::string rule_fired;
};

Dominant dominant_component(double r_attn, double r_mlp);

// Builds a profile directly from rates (the dominant component is derived).
FailureProfile make_failure_profile(double flip_rate, double r_patch, double r_attn, double r_mlp,
                                    std::optional<double> mean_first_divergence = std::nullopt);

// flip_rate is over all records. The other rates are over the diagnosed
// flips: flipped records with a patch profile (matched by pair id), each of
// which must also have an ablation profile. mean_first_divergence averages
// the defined l0 values of those pairs. Throws PreconditionError when no
// flipped record was diagnosed.
FailureProfile summarize_model(std::span<const FlipRecord> flips, std::span<const RecoveryProfile> patch,
                               std::span<const ComponentRecoveryProfile> ablation,
                               std::span<const DivergenceProfile> divergence);

// Localized: R_patch > 0.5. Distributed: R_patch < 0.1 and R_attn > R_mlp.
// Entangled: R_patch < 0.1 and R_mlp > R_attn. Anything else is Unclassified.
TaxonomyLabel classify(const FailureProfile& profile);

nlohmann::json taxonomy_to_json(const FailureProfile& profile, const TaxonomyLabel& label);
std::string taxonomy_csv_header();
std::string taxonomy_csv_row(std::string_view model, const FailureProfile& profile, const TaxonomyLabel& label);

} // namespace mpd

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpd/model/transformer.hpp"

namespace mpd {

// softmax(W_U * final_norm(h^(layer)[position])).
std::vector<double> logit_lens(const Model& model, const Trace& trace, int layer, std::size_t position);

// Base-2 Jensen-Shannon divergence, in [0, 1]. Inputs must have equal size,
// non-negative entries and sum to one within 1e-6.
double jsd(std::span<const double> p, std::span<const double> q);

struct DivergenceProfile {
    std::string pair_id;
    std::vector<double> delta;  // layers 0..L, bits
    std::vector<int> top1_orig;
    std::vector<int> top1_pert;
    std::optional<int> first_divergence;
    std::optional<double> cai;
};

// Compares the lens at the last position of each trace (the two prompts may
// have different lengths).
DivergenceProfile divergence_profile(const Model& model, const Trace& orig, const Trace& pert);

// Fraction of steps l0 -> l0+1, ..., L-1 -> L where delta strictly increases.
// nullopt when l0 is absent or equals the last layer.
std::optional<double> cascading_amplification(std::span<const double> delta, std::optional<int> first_divergence);

nlohmann::json profile_to_json(const DivergenceProfile& profile);
DivergenceProfile profile_from_json(const nlohmann::json& j);

} // namespace mpd

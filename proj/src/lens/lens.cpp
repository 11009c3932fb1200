#include "mpd/lens/lens.hpp"

#include <algorithm>
#include <cmath>

#include "mpd/error.hpp"

namespace mpd {
namespace {

void check_distribution(std::span<const double> p) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw PreconditionError("jsd: negative or NaN probability");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) throw PreconditionError("jsd: distribution does not sum to one");
}

} // namespace

std::vector<double> logit_lens(const Model& model, const Trace& trace, int layer, std::size_t position) {
    if (layer < 0 || layer > trace.num_layers())
        throw PreconditionError("logit_lens: layer out of range: " + std::to_string(layer));
    if (position >= trace.seq_len()) throw PreconditionError("logit_lens: position out of range");
    return softmax(project_to_logits(model, trace.hidden_at(layer, position)));
}

double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw PreconditionError("jsd: support size mismatch");
    check_distribution(p);
    check_distribution(q);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) total += 0.5 * p[i] * std::log2(p[i] / m);
        if (q[i] > 0.0) total += 0.5 * q[i] * std::log2(q[i] / m);
    }
    return std::clamp(total, 0.0, 1.0);
}

DivergenceProfile divergence_profile(const Model& model, const Trace& orig, const Trace& pert) {
    if (orig.num_layers() != pert.num_layers()) throw PreconditionError("divergence_profile: layer-count mismatch");
    const int L = orig.num_layers();
    const std::size_t pos_o = orig.seq_len() - 1;
    const std::size_t pos_p = pert.seq_len() - 1;

    DivergenceProfile profile;
    for (int layer = 0; layer <= L; ++layer) {
        const auto logits_o = project_to_logits(model, orig.hidden_at(layer, pos_o));
        const auto logits_p = project_to_logits(model, pert.hidden_at(layer, pos_p));
        profile.delta.push_back(jsd(softmax(logits_o), softmax(logits_p)));
        profile.top1_orig.push_back(argmax(logits_o));
        profile.top1_pert.push_back(argmax(logits_p));
        if (!profile.first_divergence && profile.top1_orig.back() != profile.top1_pert.back())
            profile.first_divergence = layer;
    }
    profile.cai = cascading_amplification(profile.delta, profile.first_divergence);
    return profile;
}

std::optional<double> cascading_amplification(std::span<const double> delta, std::optional<int> first_divergence) {
    if (!first_divergence || delta.empty()) return std::nullopt;
    const int last = static_cast<int>(delta.size()) - 1;
    const int l0 = *first_divergence;
    if (l0 < 0 || l0 > last) throw PreconditionError("cai: first divergence layer out of range");
    if (l0 == last) return std::nullopt;
    int increases = 0;
    for (int l = l0; l < last; ++l)
        if (delta[static_cast<std::size_t>(l + 1)] > delta[static_cast<std::size_t>(l)]) ++increases;
    return static_cast<double>(increases) / static_cast<double>(last - l0);
}

nlohmann::json profile_to_json(const DivergenceProfile& p) {
    return {
        {"pair_id", p.pair_id},
        {"delta", p.delta},
        {"top1_orig", p.top1_orig},
        {"top1_pert", p.top1_pert},
        {"l0", p.first_divergence ? nlohmann::json(*p.first_divergence) : nlohmann::json(nullptr)},
        {"cai", p.cai ? nlohmann::json(*p.cai) : nlohmann::json(nullptr)},
    };
}

DivergenceProfile profile_from_json(const nlohmann::json& j) {
    try {
        DivergenceProfile p;
        p.pair_id = j.at("pair_id").get<std::string>();
        p.delta = j.at("delta").get<std::vector<double>>();
        p.top1_orig = j.at("top1_orig").get<std::vector<int>>();
        p.top1_pert = j.at("top1_pert").get<std::vector<int>>();
        if (!j.at("l0").is_null()) p.first_divergence = j.at("l0").get<int>();
        if (!j.at("cai").is_null()) p.cai = j.at("cai").get<double>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(std::string{"malformed profile record: "} + e.what());
    }
}

} // namespace mpd

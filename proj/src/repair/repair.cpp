#include "mpd/repair/repair.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mpd/error.hpp"
#include "mpd/model/model_io.hpp"
#include "mpd/util/csv.hpp"
#include "mpd/util/parallel.hpp"

namespace mpd {

SteeringSet compute_steering_vectors(const Model& model, std::span<const PerturbationPair> calibration,
                                     const EvalSettings& settings, std::span<const std::string> evaluation_ids,
                                     std::string source_model) {
    if (calibration.empty()) throw PreconditionError("steering calibration set is empty");
    const std::set<std::string> eval(evaluation_ids.begin(), evaluation_ids.end());
    for (const auto& p : calibration)
        if (eval.count(p.original.id))
            throw PreconditionError("calibration pair " + p.original.id + " is also in the evaluation set");

    const auto L = static_cast<std::size_t>(model.config.num_layers);
    const auto d = static_cast<std::size_t>(model.config.d_model);
    std::vector<std::vector<double>> sum(L, std::vector<double>(d, 0.0));
    for (const auto& p : calibration) {
        const Trace orig = forward(model, encode_prompt(render_prompt(settings.prompt_template, p.original.text)));
        const Trace pert = forward(model, encode_prompt(render_prompt(settings.prompt_template, p.perturbed_text)));
        for (std::size_t l = 1; l <= L; ++l) {
            auto a = orig.hidden_at(static_cast<int>(l), orig.seq_len() - 1);
            auto b = pert.hidden_at(static_cast<int>(l), pert.seq_len() - 1);
            for (std::size_t i = 0; i < d; ++i)
                sum[l - 1][i] += static_cast<double>(a[i]) - static_cast<double>(b[i]);
        }
    }
    SteeringSet s;
    s.calibration_count = calibration.size();
    s.source_model = std::move(source_model);
    const double n = static_cast<double>(calibration.size());
    for (const auto& layer : sum) {
        std::vector<float> v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = static_cast<float>(layer[i] / n);
        s.vectors.push_back(std::move(v));
    }
    return s;
}

void validate_steering(const SteeringSet& s, const ModelConfig& config) {
    if (s.num_layers() != config.num_layers)
        throw PreconditionError("steering set has " + std::to_string(s.num_layers()) + " layers, model has " +
                                std::to_string(config.num_layers));
    for (const auto& v : s.vectors) {
        if (v.size() != static_cast<std::size_t>(config.d_model))
            throw PreconditionError("steering vector width does not match d_model");
        for (float x : v)
            if (!std::isfinite(x)) throw PreconditionError("steering vector is not finite");
    }
}

namespace {

nlohmann::json steering_meta(const SteeringSet& s) {
    nlohmann::json meta;
    meta["kind"] = "steering";
    meta["calibration_count"] = s.calibration_count;
    meta["source_model"] = s.source_model;
    return meta;
}

std::vector<TensorView> steering_views(const SteeringSet& s) {
    std::vector<TensorView> views;
    for (std::size_t l = 0; l < s.vectors.size(); ++l)
        views.push_back({"steering.layers." + std::to_string(l + 1), {s.vectors[l].size()}, s.vectors[l]});
    return views;
}

} // namespace

std::string encode_steering(const SteeringSet& s) { return encode_tensor_file(steering_meta(s), steering_views(s)); }

namespace {

SteeringSet steering_from_file(TensorFile file) {
    const auto& h = file.header;
    if (h.value("kind", "") != "steering") throw LoadError("not a steering file");
    SteeringSet s;
    s.calibration_count = h.at("calibration_count").get<std::size_t>();
    s.source_model = h.at("source_model").get<std::string>();
    for (std::size_t l = 0; l < file.tensors.size(); ++l) {
        auto& t = file.tensors[l];
        if (t.name != "steering.layers." + std::to_string(l + 1) || t.shape.size() != 1)
            throw LoadError("unexpected steering tensor " + t.name);
        for (float x : t.values)
            if (!std::isfinite(x)) throw LoadError("non-finite value in " + t.name);
        s.vectors.push_back(std::move(t.values));
    }
    if (s.vectors.empty()) throw LoadError("steering file has no vectors");
    return s;
}

} // namespace

SteeringSet decode_steering(const std::string& bytes) { return steering_from_file(decode_tensor_file(bytes)); }

void save_steering(const std::filesystem::path& path, const SteeringSet& s) {
    write_tensor_file(path, steering_meta(s), steering_views(s));
}

SteeringSet load_steering(const std::filesystem::path& path) { return steering_from_file(read_tensor_file(path)); }

SteeringOutcome apply_steering(const Model& model, const PerturbationPair& pair, const SteeringSet& steering,
                               float alpha, std::span<const int> layers, const EvalSettings& settings) {
    if (!std::isfinite(alpha)) throw PreconditionError("steering alpha must be finite");
    validate_steering(steering, model.config);
    std::vector<Intervention> ivs;
    auto add = [&](int l) {
        if (l < 1 || l > model.config.num_layers)
            throw PreconditionError("steering layer " + std::to_string(l) + " out of range");
        ivs.push_back(Intervention::steer(l, steering.vectors[static_cast<std::size_t>(l - 1)], alpha));
    };
    if (layers.empty())
        for (int l = 1; l <= model.config.num_layers; ++l) add(l);
    else
        for (int l : layers) add(l);
    Answer a = run_problem(model, pair.perturbed_text, settings, ivs);
    SteeringOutcome out;
    out.recovered = is_correct(a, pair.original.gold_answer);
    out.answer = std::move(a.value);
    out.completion = std::move(a.completion);
    return out;
}

std::string_view to_string(RepairOutcome o) {
    switch (o) {
    case RepairOutcome::recovered: return "recovered";
    case RepairOutcome::still_wrong: return "still-wrong";
    case RepairOutcome::still_correct: return "still-correct";
    case RepairOutcome::regressed: return "regressed";
    }
    return "?";
}

std::vector<RepairReport> repair_sweep(const Model& model, std::span<const PerturbationPair> pairs,
                                       std::span<const FlipRecord> records, const SteeringSet& steering,
                                       std::span<const float> alphas, std::span<const int> layers,
                                       const EvalSettings& settings, int threads) {
    std::map<std::string, const PerturbationPair*> by_id;
    for (const auto& p : pairs) by_id[p.original.id] = &p;
    std::vector<const FlipRecord*> evaluated;
    std::size_t flipped = 0;
    for (const auto& r : records) {
        if (!r.correct_orig) continue;
        if (!by_id.count(r.pair_id)) throw PreconditionError("no pair for record " + r.pair_id);
        evaluated.push_back(&r);
        flipped += r.flip;
    }
    if (flipped == 0) throw PreconditionError("repair_sweep: no flipped samples");

    std::vector<int> used(layers.begin(), layers.end());
    if (used.empty())
        for (int l = 1; l <= model.config.num_layers; ++l) used.push_back(l);

    std::vector<RepairReport> reports;
    for (float alpha : alphas) {
        std::vector<char> correct(evaluated.size(), 0);
        util::parallel_for(evaluated.size(), threads, [&](std::size_t i) {
            correct[i] = apply_steering(model, *by_id.at(evaluated[i]->pair_id), steering, alpha, used, settings)
                             .recovered;
        });
        RepairReport rep;
        rep.alpha = alpha;
        rep.layers = used;
        for (std::size_t i = 0; i < evaluated.size(); ++i) {
            const FlipRecord& r = *evaluated[i];
            RepairOutcome o;
            if (r.flip) {
                ++rep.flipped_n;
                o = correct[i] ? RepairOutcome::recovered : RepairOutcome::still_wrong;
                rep.recovered += correct[i];
            } else {
                ++rep.stable_n;
                o = correct[i] ? RepairOutcome::still_correct : RepairOutcome::regressed;
                rep.regressed += !correct[i];
            }
            rep.samples.emplace_back(r.pair_id, o);
        }
        const double f = static_cast<double>(rep.flipped_n);
        rep.rate = static_cast<double>(rep.recovered) / f;
        rep.regression_rate = rep.stable_n ? static_cast<double>(rep.regressed) / static_cast<double>(rep.stable_n) : 0.0;
        rep.net_rate = (static_cast<double>(rep.recovered) - static_cast<double>(rep.regressed)) / f;
        reports.push_back(std::move(rep));
    }
    return reports;
}

namespace {

std::string join_layers(const std::vector<int>& layers) {
    std::string s;
    for (std::size_t i = 0; i < layers.size(); ++i) s += (i ? ";" : "") + std::to_string(layers[i]);
    return s;
}

} // namespace

std::string repair_csv_header() {
    return util::csv_record({"alpha", "layers", "recovered", "flipped_n", "regressed", "stable_n", "rate", "net_rate"});
}

std::string repair_csv_row(const RepairReport& r) {
    return util::csv_record({util::format_number(static_cast<double>(r.alpha)), join_layers(r.layers),
                             std::to_string(r.recovered), std::to_string(r.flipped_n), std::to_string(r.regressed),
                             std::to_string(r.stable_n), util::format_number(r.rate), util::format_number(r.net_rate)});
}

nlohmann::json repair_to_json(const RepairReport& r) {
    nlohmann::json j;
    j["alpha"] = r.alpha;
    j["layers"] = r.layers;
    j["recovered"] = r.recovered;
    j["flipped_n"] = r.flipped_n;
    j["regressed"] = r.regressed;
    j["stable_n"] = r.stable_n;
    j["rate"] = r.rate;
    j["regression_rate"] = r.regression_rate;
    j["net_rate"] = r.net_rate;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& [id, o] : r.samples) samples.push_back({{"pair_id", id}, {"outcome", to_string(o)}});
    j["samples"] = std::move(samples);
    return j;
}

RepairReport repair_from_json(const nlohmann::json& j) {
    RepairReport r;
    r.alpha = j.at("alpha").get<float>();
    r.layers = j.at("layers").get<std::vector<int>>();
    r.recovered = j.at("recovered").get<std::size_t>();
    r.flipped_n = j.at("flipped_n").get<std::size_t>();
    r.regressed = j.at("regressed").get<std::size_t>();
    r.stable_n = j.at("stable_n").get<std::size_t>();
    r.rate = j.at("rate").get<double>();
    r.regression_rate = j.at("regression_rate").get<double>();
    r.net_rate = j.at("net_rate").get<double>();
    for (const auto& s : j.at("samples")) {
        const auto o = s.at("outcome").get<std::string>();
        RepairOutcome out = RepairOutcome::recovered;
        for (auto c : {RepairOutcome::recovered, RepairOutcome::still_wrong, RepairOutcome::still_correct,
                       RepairOutcome::regressed})
            if (to_string(c) == o) out = c;
        r.samples.emplace_back(s.at("pair_id").get<std::string>(), out);
    }
    return r;
}

} // namespace mpd

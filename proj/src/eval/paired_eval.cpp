#include "mpd/eval/paired_eval.hpp"

#include <cctype>

#include "mpd/error.hpp"
#include "mpd/util/parallel.hpp"

namespace mpd {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

nlohmann::json answer_json(const std::optional<Rational>& a) {
    return a ? nlohmann::json(format_decimal(*a)) : nlohmann::json(nullptr);
}

std::optional<Rational> answer_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return parse_decimal(j.get<std::string>());
}

} // namespace

std::string render_prompt(std::string_view prompt_template, std::string_view problem_text) {
    const auto at = prompt_template.find(kProblemPlaceholder);
    if (at == std::string_view::npos)
        throw PreconditionError("prompt template lacks the {problem} placeholder");
    std::string out{prompt_template.substr(0, at)};
    out.append(problem_text);
    out.append(prompt_template.substr(at + kProblemPlaceholder.size()));
    return out;
}

std::string response_region(std::string_view prompt_template, std::string_view completion) {
    const auto at = prompt_template.find(kProblemPlaceholder);
    std::string out;
    if (at != std::string_view::npos) out = prompt_template.substr(at + kProblemPlaceholder.size());
    out.append(completion);
    return out;
}

std::optional<Rational> extract_answer(std::string_view text) {
    const auto delim = text.rfind("####");
    if (delim == std::string_view::npos) return std::nullopt;
    std::string_view rest = text.substr(delim + 4);

    std::string cleaned;
    for (char c : rest) {
        if (c == '$' || c == '%' || c == ',') continue;
        if (is_space(c)) {
            if (cleaned.empty()) continue;
            break;
        }
        cleaned.push_back(c);
    }
    if (cleaned.empty()) return std::nullopt;
    return parse_decimal(cleaned);
}

Answer run_problem(const Model& model, std::string_view problem_text, const EvalSettings& settings,
                   std::span<const Intervention> interventions) {
    const std::string prompt = render_prompt(settings.prompt_template, problem_text);
    GenerationResult gen = generate_greedy(model, prompt, settings.max_tokens, interventions);
    Answer a;
    a.value = extract_answer(response_region(settings.prompt_template, gen.text));
    a.completion = std::move(gen.text);
    return a;
}

bool is_correct(const Answer& answer, const Rational& gold) { return answer.value && *answer.value == gold; }

FlipRecord make_flip_record(const PerturbationPair& pair, Answer orig, Answer pert) {
    FlipRecord r;
    r.pair_id = pair.original.id;
    r.ptype = pair.ptype;
    r.correct_orig = is_correct(orig, pair.original.gold_answer);
    r.correct_pert = is_correct(pert, pair.original.gold_answer);
    r.flip = r.correct_orig && !r.correct_pert;
    r.answer_orig = orig.value;
    r.answer_pert = pert.value;
    r.completion_orig = std::move(orig.completion);
    r.completion_pert = std::move(pert.completion);
    return r;
}

FlipRecord evaluate_pair(const Model& model, const PerturbationPair& pair, const EvalSettings& settings) {
    try {
        Answer orig = run_problem(model, pair.original.text, settings);
        Answer pert = run_problem(model, pair.perturbed_text, settings);
        return make_flip_record(pair, std::move(orig), std::move(pert));
    } catch (const Error& e) {
        throw Error("pair " + pair.original.id + ": " + e.what());
    }
}

std::vector<FlipRecord> evaluate_pairs(const Model& model, std::span<const PerturbationPair> pairs,
                                       const EvalSettings& settings, int threads) {
    std::vector<FlipRecord> out(pairs.size());
    util::parallel_for(pairs.size(), threads,
                       [&](std::size_t i) { out[i] = evaluate_pair(model, pairs[i], settings); });
    return out;
}

RateTable flip_rate(std::span<const FlipRecord> records, GroupBy group_by) {
    RateTable table;
    auto add_group = [&](const std::string& name, auto&& include) {
        RateRow row;
        row.group = name;
        for (const auto& r : records) {
            if (!include(r) || !r.correct_orig) continue;
            ++row.denominator;
            if (r.flip) ++row.flips;
        }
        if (row.denominator == 0) {
            table.warnings.push_back("group '" + name + "' has no originally-correct samples; omitted");
            return;
        }
        row.rate = static_cast<double>(row.flips) / static_cast<double>(row.denominator);
        table.rows.push_back(std::move(row));
    };
    add_group("overall", [](const FlipRecord&) { return true; });
    if (group_by == GroupBy::ptype)
        for (auto t : {PerturbationType::name_swap, PerturbationType::number_paraphrase})
            add_group(std::string{to_string(t)}, [t](const FlipRecord& r) { return r.ptype == t; });
    return table;
}

nlohmann::json flip_to_json(const FlipRecord& r) {
    return {
        {"pair_id", r.pair_id},
        {"ptype", to_string(r.ptype)},
        {"answer_orig", answer_json(r.answer_orig)},
        {"answer_pert", answer_json(r.answer_pert)},
        {"correct_orig", r.correct_orig},
        {"correct_pert", r.correct_pert},
        {"flip", r.flip},
        {"completion_orig", r.completion_orig},
        {"completion_pert", r.completion_pert},
    };
}

FlipRecord flip_from_json(const nlohmann::json& j) {
    try {
        FlipRecord r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.ptype = perturbation_type_from_string(j.at("ptype").get<std::string>());
        r.answer_orig = answer_from_json(j.at("answer_orig"));
        r.answer_pert = answer_from_json(j.at("answer_pert"));
        r.correct_orig = j.at("correct_orig").get<bool>();
        r.correct_pert = j.at("correct_pert").get<bool>();
        r.flip = j.at("flip").get<bool>();
        r.completion_orig = j.value("completion_orig", "");
        r.completion_pert = j.value("completion_pert", "");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(std::string{"malformed flip record: "} + e.what());
    }
}

} // namespace mpd

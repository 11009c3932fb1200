#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mpd/model/transformer.hpp"
#include "mpd/perturb/perturbgen.hpp"
#include "mpd/util/rational.hpp"

namespace mpd {

inline constexpr std::string_view kProblemPlaceholder = "{problem}";

// The prompt ends with the delimiter so the completion starts at the answer.
inline constexpr std::string_view kDefaultTemplate =
    "Solve the math problem and give the final answer after ####.\nProblem: {problem}\nAnswer: ####";

struct EvalSettings {
    std::string prompt_template{kDefaultTemplate};
    int max_tokens = 8;
};

// Throws PreconditionError when the template has no placeholder.
std::string render_prompt(std::string_view prompt_template, std::string_view problem_text);

// Answers are read from the model's response region: the template text after
// the placeholder followed by the completion. A template that already ends in
// "####" therefore lets a bare "42" completion count as an answer.
std::string response_region(std::string_view prompt_template, std::string_view completion);

// Number after the last "####": whitespace, "$", "%" and commas are removed
// and the first remaining token is parsed as a decimal. nullopt on failure.
std::optional<Rational> extract_answer(std::string_view text);

struct Answer {
    std::optional<Rational> value;
    std::string completion;
};

// One greedy generation of `problem_text` under `settings` and `interventions`.
Answer run_problem(const Model& model, std::string_view problem_text, const EvalSettings& settings,
                   std::span<const Intervention> interventions = {});

bool is_correct(const Answer& answer, const Rational& gold);

struct FlipRecord {
    std::string pair_id;
    PerturbationType ptype = PerturbationType::name_swap;
    std::optional<Rational> answer_orig;
    std::optional<Rational> answer_pert;
    bool correct_orig = false;
    bool correct_pert = false;
    bool flip = false;
    std::string completion_orig;
    std::string completion_pert;
};

// flip = correct_orig && !correct_pert
FlipRecord make_flip_record(const PerturbationPair& pair, Answer orig, Answer pert);

FlipRecord evaluate_pair(const Model& model, const PerturbationPair& pair, const EvalSettings& settings);

std::vector<FlipRecord> evaluate_pairs(const Model& model, std::span<const PerturbationPair> pairs,
                                       const EvalSettings& settings, int threads = 1);

enum class GroupBy { overall, ptype };

struct RateRow {
    std::string group;
    std::size_t flips = 0;
    std::size_t denominator = 0;  // originally-correct samples
    double rate = 0.0;
};

struct RateTable {
    std::vector<RateRow> rows;
    std::vector<std::string> warnings;
};

// Rows in fixed order: "overall", then "name-swap", "number-paraphrase" when
// grouping by type. Groups without an originally-correct sample are dropped
// with a warning.
RateTable flip_rate(std::span<const FlipRecord> records, GroupBy group_by);

nlohmann::json flip_to_json(const FlipRecord& record);
FlipRecord flip_from_json(const nlohmann::json& j);

} // namespace mpd

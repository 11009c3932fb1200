#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mpd/error.hpp"
#include "mpd/util/rational.hpp"

namespace mpd {

struct Problem {
    std::string id;
    std::string text;
    Rational gold_answer;
};

enum class PerturbationType { name_swap, number_paraphrase };

std::string_view to_string(PerturbationType t);
PerturbationType perturbation_type_from_string(std::string_view s);

// Replace original[start, end) with `replacement`.
struct Substitution {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string replacement;

    bool operator==(const Substitution&) const = default;
};

struct PerturbationPair {
    Problem original;
    std::string perturbed_text;
    PerturbationType ptype = PerturbationType::name_swap;
    std::vector<Substitution> substitutions;  // sorted, non-overlapping
};

struct Skip {
    std::string id;
    std::string reason;  // "no-names", "collision", "no-numbers", "ambiguous"
};

using PerturbResult = std::variant<PerturbationPair, Skip>;

// Capitalized first names used both to detect names in a problem and as the
// replacement pool. Construction enforces case-insensitive uniqueness and
// that no name is a prefix of another.
class NameLexicon {
public:
    explicit NameLexicon(std::vector<std::string> names);

    static const NameLexicon& builtin();

    bool contains(std::string_view word) const;
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
};

PerturbResult substitute_names(const Problem& problem, const NameLexicon& lexicon, std::uint64_t seed);

PerturbResult paraphrase_numbers(const Problem& problem);

struct DatasetConfig {
    double name_fraction = 0.5;  // share of problems assigned to name-swap
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<PerturbationPair> pairs;
    std::vector<Skip> skips;
};

// Raised when every problem was skipped; carries the skip log.
class EmptyDatasetError : public DatasetError {
public:
    explicit EmptyDatasetError(std::vector<Skip> skips);
    const std::vector<Skip>& skips() const { return skips_; }

private:
    std::vector<Skip> skips_;
};

// Problem i goes to name-swap when the running quota floor(i*f + 0.5)
// advances, so f = 0.5 alternates name, number, name, ...
PerturbationType assigned_type(std::size_t index, double name_fraction);

Dataset build_pair_dataset(std::span<const Problem> corpus, const DatasetConfig& config,
                           const NameLexicon& lexicon = NameLexicon::builtin());

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_pair(const PerturbationPair& pair);

std::string apply_substitutions(std::string_view text, std::span<const Substitution> substitutions);

// Numeric literals in reading order ("1,234.5" -> 2469/2). Unit words and
// symbols are not part of a literal, so "$5" and "5 dollars" both give {5}.
std::vector<Rational> extract_numerals(std::string_view text);

nlohmann::json pair_to_json(const PerturbationPair& pair);
PerturbationPair pair_from_json(const nlohmann::json& j);
Problem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const Problem& problem);

} // namespace mpd

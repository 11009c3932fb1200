#include "mpd/perturb/perturbgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>

#include "mpd/util/hash.hpp"
#include "mpd/util/rng.hpp"

namespace mpd {
namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string lower(std::string_view s) {
    std::string out{s};
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct Span {
    std::size_t start;
    std::size_t end;
};

std::vector<Span> words(std::string_view text) {
    std::vector<Span> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_letter(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_letter(text[j])) ++j;
        out.push_back({i, j});
        i = j;
    }
    return out;
}

// A numeric literal starting at `i`: digit, then digits / commas-before-digit,
// then an optional ".digits" fraction. Must not continue a word or number.
std::optional<std::size_t> number_end(std::string_view text, std::size_t i) {
    if (i >= text.size() || !is_digit(text[i])) return std::nullopt;
    if (i > 0) {
        const char prev = text[i - 1];
        if (is_digit(prev) || is_letter(prev) || prev == '.' || prev == ',') return std::nullopt;
    }
    std::size_t j = i + 1;
    while (j < text.size()) {
        if (is_digit(text[j])) {
            ++j;
        } else if (text[j] == ',' && j + 1 < text.size() && is_digit(text[j + 1])) {
            j += 2;
        } else {
            break;
        }
    }
    if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
        j += 2;
        while (j < text.size() && is_digit(text[j])) ++j;
    }
    return j;
}

// True when text[pos..] is `word` and the word is not a prefix of a longer one.
bool word_at(std::string_view text, std::size_t pos, std::string_view word) {
    if (text.substr(pos, word.size()) != word) return false;
    const std::size_t after = pos + word.size();
    return after >= text.size() || !is_letter(text[after]);
}

} // namespace

std::string_view to_string(PerturbationType t) {
    return t == PerturbationType::name_swap ? "name-swap" : "number-paraphrase";
}

PerturbationType perturbation_type_from_string(std::string_view s) {
    if (s == "name-swap") return PerturbationType::name_swap;
    if (s == "number-paraphrase") return PerturbationType::number_paraphrase;
    throw DatasetError("unknown perturbation type: " + std::string{s});
}

NameLexicon::NameLexicon(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty() || !std::isupper(static_cast<unsigned char>(n.front())) ||
            !std::all_of(n.begin(), n.end(), is_letter))
            throw ConfigError("lexicon names must be capitalized single words: '" + n + "'");
        if (!seen.insert(lower(n)).second) throw ConfigError("duplicate lexicon name: " + n);
    }
    for (const auto& a : names_)
        for (const auto& b : names_)
            if (a != b && lower(b).starts_with(lower(a)))
                throw ConfigError("lexicon name '" + a + "' is a prefix of '" + b + "'");
}

const NameLexicon& NameLexicon::builtin() {
    static const NameLexicon lexicon({
        "Alice", "Amir",   "Betty",  "Brian",  "Carla",  "Carlos",  "Chloe", "Daniel", "Derek",
        "Elena", "Emily",  "Ethan",  "Felix",  "Fiona",  "Frank",   "George", "Grace", "Greta",
        "Hannah", "Hazel", "Henry",  "Inez",   "Irene",  "Isaac",   "Ivan",   "Jack",  "Janet",
        "Jasmine", "John", "Julia",  "Kevin",  "Kyle",   "Laura",   "Lena",   "Leo",   "Liz",
        "Lucas", "Marco",  "Maria",  "Mark",   "Mary",   "Megan",   "Mia",    "Nadia", "Nina",
        "Noah",  "Olivia", "Omar",   "Oscar",  "Paula",  "Peter",   "Priya",  "Quinn", "Rachel",
        "Rosa",  "Ruby",   "Sam",    "Sophie", "Suzy",   "Tina",    "Tom",    "Tyler", "Uma",
        "Vera",  "Victor", "Walter", "Wendy",  "Xavier", "Yara",    "Yusuf",  "Zack",  "Zoe",
    });
    return lexicon;
}

bool NameLexicon::contains(std::string_view word) const {
    return std::find(names_.begin(), names_.end(), word) != names_.end();
}

PerturbResult substitute_names(const Problem& problem, const NameLexicon& lexicon, std::uint64_t seed) {
    const std::string_view text = problem.text;
    const auto all_words = words(text);

    std::vector<Span> occurrences;
    std::vector<std::string> distinct;
    for (const auto& w : all_words) {
        const std::string_view word = text.substr(w.start, w.end - w.start);
        if (!std::isupper(static_cast<unsigned char>(word.front())) || !lexicon.contains(word)) continue;
        occurrences.push_back(w);
        if (std::find(distinct.begin(), distinct.end(), word) == distinct.end()) distinct.emplace_back(word);
    }
    if (distinct.empty()) return Skip{problem.id, "no-names"};
    if (lexicon.names().size() < 2 * distinct.size())
        throw PreconditionError("name lexicon too small for problem " + problem.id);

    std::vector<std::string> pool;
    for (const auto& n : lexicon.names())
        if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) pool.push_back(n);

    util::Rng rng(seed * 0x9E3779B97F4A7C15ull ^ util::fnv1a(problem.id));
    std::vector<std::string> replacement(distinct.size());
    for (auto& r : replacement) {
        const auto idx = static_cast<std::ptrdiff_t>(rng.index(pool.size()));
        r = pool[static_cast<std::size_t>(idx)];
        pool.erase(pool.begin() + idx);
    }

    std::set<std::string> existing;
    for (const auto& w : all_words) existing.insert(lower(text.substr(w.start, w.end - w.start)));
    for (const auto& r : replacement)
        if (existing.count(lower(r))) return Skip{problem.id, "collision"};

    PerturbationPair pair;
    pair.original = problem;
    pair.ptype = PerturbationType::name_swap;
    for (const auto& occ : occurrences) {
        const std::string_view word = text.substr(occ.start, occ.end - occ.start);
        const auto which = std::find(distinct.begin(), distinct.end(), word) - distinct.begin();
        pair.substitutions.push_back({occ.start, occ.end, replacement[static_cast<std::size_t>(which)]});
    }
    pair.perturbed_text = apply_substitutions(text, pair.substitutions);
    return pair;
}

PerturbResult paraphrase_numbers(const Problem& problem) {
    const std::string_view text = problem.text;
    PerturbationPair pair;
    pair.original = problem;
    pair.ptype = PerturbationType::number_paraphrase;

    std::size_t i = 0;
    while (i < text.size()) {
        // "$N" -> "N dollars"
        if (text[i] == '$') {
            if (auto end = number_end(text, i + 1)) {
                const std::string_view n = text.substr(i + 1, *end - i - 1);
                if (word_at(text, *end, " dollars") || (*end < text.size() && text[*end] == '%'))
                    return Skip{problem.id, "ambiguous"};
                pair.substitutions.push_back({i, *end, std::string{n} + " dollars"});
                i = *end;
                continue;
            }
        }
        if (auto end = number_end(text, i)) {
            const std::string n{text.substr(i, *end - i)};
            if (*end < text.size() && text[*end] == '%') {
                // "N%" -> "N percent"
                if (word_at(text, *end + 1, " percent")) return Skip{problem.id, "ambiguous"};
                pair.substitutions.push_back({i, *end + 1, n + " percent"});
                i = *end + 1;
                continue;
            }
            if (word_at(text, *end, " dollars")) {
                pair.substitutions.push_back({i, *end + 8, "$" + n});
                i = *end + 8;
                continue;
            }
            if (word_at(text, *end, " percent")) {
                pair.substitutions.push_back({i, *end + 8, n + "%"});
                i = *end + 8;
                continue;
            }
            i = *end;
            continue;
        }
        ++i;
    }
    if (pair.substitutions.empty()) return Skip{problem.id, "no-numbers"};
    pair.perturbed_text = apply_substitutions(text, pair.substitutions);
    return pair;
}

EmptyDatasetError::EmptyDatasetError(std::vector<Skip> skips)
    : DatasetError("every problem was skipped (" + std::to_string(skips.size()) + " skips)"),
      skips_(std::move(skips)) {}

PerturbationType assigned_type(std::size_t index, double name_fraction) {
    const double f = std::clamp(name_fraction, 0.0, 1.0);
    const auto before = std::floor(static_cast<double>(index) * f + 0.5);
    const auto after = std::floor(static_cast<double>(index + 1) * f + 0.5);
    return after > before ? PerturbationType::name_swap : PerturbationType::number_paraphrase;
}

Dataset build_pair_dataset(std::span<const Problem> corpus, const DatasetConfig& config,
                           const NameLexicon& lexicon) {
    if (corpus.empty()) throw DatasetError("empty corpus");
    Dataset out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Problem& p = corpus[i];
        PerturbResult r = assigned_type(i, config.name_fraction) == PerturbationType::name_swap
                              ? substitute_names(p, lexicon, config.seed)
                              : paraphrase_numbers(p);
        if (auto* pair = std::get_if<PerturbationPair>(&r)) {
            out.pairs.push_back(std::move(*pair));
        } else {
            out.skips.push_back(std::get<Skip>(std::move(r)));
        }
    }
    if (out.pairs.empty()) throw EmptyDatasetError(std::move(out.skips));
    return out;
}

std::string apply_substitutions(std::string_view text, std::span<const Substitution> subs) {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& s : subs) {
        if (s.start < cursor || s.end < s.start || s.end > text.size())
            throw PreconditionError("substitutions must be sorted, non-overlapping and in bounds");
        out.append(text.substr(cursor, s.start - cursor));
        out.append(s.replacement);
        cursor = s.end;
    }
    out.append(text.substr(cursor));
    return out;
}

std::vector<Rational> extract_numerals(std::string_view text) {
    std::vector<Rational> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (auto end = number_end(text, i)) {
            std::string digits;
            for (std::size_t k = i; k < *end; ++k)
                if (text[k] != ',') digits.push_back(text[k]);
            // Literals too long for 64-bit are kept as a sentinel so they still count.
            out.push_back(parse_decimal(digits).value_or(Rational(-1, 7)));
            i = *end;
        } else {
            ++i;
        }
    }
    return out;
}

ValidationReport validate_pair(const PerturbationPair& pair) {
    ValidationReport report;
    const std::string& original = pair.original.text;
    if (pair.perturbed_text == original) report.violations.emplace_back("identical-text");

    bool spans_ok = true;
    std::size_t cursor = 0;
    for (const auto& s : pair.substitutions) {
        if (s.end > original.size() || s.end < s.start) {
            report.violations.emplace_back("span-out-of-bounds");
            spans_ok = false;
            break;
        }
        if (s.start < cursor) {
            report.violations.emplace_back("span-overlap");
            spans_ok = false;
            break;
        }
        cursor = s.end;
    }
    if (spans_ok && apply_substitutions(original, pair.substitutions) != pair.perturbed_text)
        report.violations.emplace_back("substitution-mismatch");

    if (pair.ptype == PerturbationType::name_swap && spans_ok)
        for (const auto& s : pair.substitutions) {
            const std::string_view before = std::string_view{original}.substr(s.start, s.end - s.start);
            const auto has_digit = [](std::string_view v) { return std::any_of(v.begin(), v.end(), is_digit); };
            if (has_digit(before) || has_digit(s.replacement)) {
                report.violations.emplace_back("numeral-in-name-span");
                break;
            }
        }

    auto a = extract_numerals(original);
    auto b = extract_numerals(pair.perturbed_text);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) report.violations.emplace_back("numeral-changed");
    return report;
}

nlohmann::json pair_to_json(const PerturbationPair& pair) {
    auto subs = nlohmann::json::array();
    for (const auto& s : pair.substitutions)
        subs.push_back({{"span", {s.start, s.end}}, {"replacement", s.replacement}});
    return {
        {"id", pair.original.id},
        {"ptype", to_string(pair.ptype)},
        {"original_text", pair.original.text},
        {"perturbed_text", pair.perturbed_text},
        {"gold_answer", format_decimal(pair.original.gold_answer)},
        {"substitutions", std::move(subs)},
    };
}

namespace {

Rational gold_from_json(const nlohmann::json& v) {
    std::string text;
    if (v.is_string()) {
        text = v.get<std::string>();
    } else if (v.is_number_integer()) {
        text = std::to_string(v.get<std::int64_t>());
    } else if (v.is_number()) {
        text = v.dump();
    } else {
        throw DatasetError("gold_answer must be a decimal string or number");
    }
    if (const auto slash = text.find('/'); slash != std::string::npos) {
        const auto n = parse_decimal(text.substr(0, slash));
        const auto d = parse_decimal(text.substr(slash + 1));
        if (n && d && n->denominator() == 1 && d->denominator() == 1 && d->numerator() != 0)
            return Rational(n->numerator(), d->numerator());
    } else if (auto r = parse_decimal(text)) {
        return *r;
    }
    throw DatasetError("unparseable gold_answer: " + text);
}

} // namespace

PerturbationPair pair_from_json(const nlohmann::json& j) {
    try {
        PerturbationPair pair;
        pair.original.id = j.at("id").get<std::string>();
        pair.original.text = j.at("original_text").get<std::string>();
        pair.original.gold_answer = gold_from_json(j.at("gold_answer"));
        pair.perturbed_text = j.at("perturbed_text").get<std::string>();
        pair.ptype = perturbation_type_from_string(j.at("ptype").get<std::string>());
        for (const auto& s : j.value("substitutions", nlohmann::json::array())) {
            const auto span = s.at("span");
            pair.substitutions.push_back(
                {span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>(), s.at("replacement").get<std::string>()});
        }
        return pair;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(std::string{"malformed pair record: "} + e.what());
    }
}

Problem problem_from_json(const nlohmann::json& j) {
    try {
        Problem p{j.at("id").get<std::string>(), j.at("text").get<std::string>(), gold_from_json(j.at("gold_answer"))};
        if (p.text.empty()) throw DatasetError("problem " + p.id + " has empty text");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(std::string{"malformed problem record: "} + e.what());
    }
}

nlohmann::json problem_to_json(const Problem& p) {
    return {{"id", p.id}, {"text", p.text}, {"gold_answer", format_decimal(p.gold_answer)}};
}

} // namespace mpd

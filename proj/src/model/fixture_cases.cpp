#include "mpd/model/fixture_cases.hpp"

#include <array>

#include "mpd/error.hpp"

namespace mpd {

namespace {

constexpr std::array<const char*, 4> kStems = {"o", "ela", "iro", "una"};
constexpr std::array<std::array<const char*, 3>, 4> kWordings = {{
    {"", " has ", " cups and then "},
    {"Today ", " buys ", " pears, so "},
    {"At noon ", " finds ", " shells while "},
    {"", " reads ", " pages before "},
}};
constexpr std::array<const char*, 4> kEndings = {" keeps them.", " eats one.", " goes home.", " sleeps."};

struct Sentence {
    std::string text;
    std::size_t first = 0;
    std::size_t second = 0;
    std::size_t name_len = 0;
};

Sentence render(char initial, int digit, std::uint64_t variant) {
    if (digit < 0 || digit > 9) throw PreconditionError("fixture gold must be a single digit");
    const auto& w = kWordings[variant % kWordings.size()];
    const std::string name = std::string(1, initial) + kStems[(variant / 4) % kStems.size()];
    Sentence s;
    s.name_len = name.size();
    s.text = w[0];
    s.first = s.text.size();
    s.text += name + w[1] + std::string(1, static_cast<char>('0' + digit)) + w[2];
    s.second = s.text.size();
    s.text += name + kEndings[(variant / 16) % kEndings.size()];
    return s;
}

PerturbationPair make_pair(std::string id, const Sentence& orig, char new_initial, int digit) {
    PerturbationPair p;
    p.original.id = std::move(id);
    p.original.text = orig.text;
    p.original.gold_answer = Rational(digit);
    p.ptype = PerturbationType::name_swap;
    const std::string renamed = std::string(1, new_initial) + orig.text.substr(orig.first + 1, orig.name_len - 1);
    p.substitutions = {{orig.first, orig.first + orig.name_len, renamed},
                       {orig.second, orig.second + orig.name_len, renamed}};
    p.perturbed_text = apply_substitutions(p.original.text, p.substitutions);
    return p;
}

} // namespace

PerturbationPair fixture_pair(const ToyModel& toy, std::string id, int gold_digit, std::uint64_t variant) {
    if (toy.triggers.empty()) throw PreconditionError("fixture has no trigger letter");
    return make_pair(std::move(id), render(toy.original_initial, gold_digit, variant), toy.triggers[0], gold_digit);
}

PerturbationPair stable_fixture_pair(const ToyModel& toy, std::string id, int gold_digit, std::uint64_t variant) {
    // Another non-trigger initial keeps both runs clean.
    char other = toy.original_initial == 'R' ? 'L' : 'R';
    return make_pair(std::move(id), render(toy.original_initial, gold_digit, variant), other, gold_digit);
}

} // namespace mpd

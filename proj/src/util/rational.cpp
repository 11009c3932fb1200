#include "mpd/util/rational.hpp"

#include <algorithm>

namespace mpd {
namespace {

constexpr std::size_t kMaxDigits = 18;

} // namespace

std::optional<Rational> parse_decimal(std::string_view text) {
    bool negative = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    const auto dot = text.find('.');
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() && frac.empty()) return std::nullopt;
    if (dot != std::string_view::npos && frac.empty() && whole.empty()) return std::nullopt;
    auto all_digits = [](std::string_view s) {
        return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (!all_digits(whole) || !all_digits(frac)) return std::nullopt;

    while (!whole.empty() && whole.front() == '0') whole.remove_prefix(1);
    while (!frac.empty() && frac.back() == '0') frac.remove_suffix(1);
    if (whole.size() + frac.size() > kMaxDigits) return std::nullopt;

    std::int64_t numerator = 0;
    for (char c : whole) numerator = numerator * 10 + (c - '0');
    std::int64_t denominator = 1;
    for (char c : frac) {
        numerator = numerator * 10 + (c - '0');
        denominator *= 10;
    }
    return Rational(negative ? -numerator : numerator, denominator);
}

std::string format_decimal(const Rational& value) {
    std::int64_t den = value.denominator();
    int twos = 0, fives = 0;
    while (den % 2 == 0) { den /= 2; ++twos; }
    while (den % 5 == 0) { den /= 5; ++fives; }
    const std::int64_t num = value.numerator();
    if (den != 1) return std::to_string(num) + "/" + std::to_string(value.denominator());

    const int places = std::max(twos, fives);
    if (places == 0) return std::to_string(num);
    // Scale to a power-of-ten denominator; fits because the input did.
    std::int64_t scaled = num < 0 ? -num : num;
    for (int i = twos; i < places; ++i) scaled *= 2;
    for (int i = fives; i < places; ++i) scaled *= 5;
    std::string digits = std::to_string(scaled);
    if (digits.size() <= static_cast<std::size_t>(places))
        digits.insert(0, static_cast<std::size_t>(places) + 1 - digits.size(), '0');
    digits.insert(digits.size() - static_cast<std::size_t>(places), ".");
    return (num < 0 ? "-" : "") + digits;
}

} // namespace mpd

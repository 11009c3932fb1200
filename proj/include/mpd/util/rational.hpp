#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace mpd {

using Rational = boost::rational<std::int64_t>;

// Plain decimal: optional sign, digits, optional fraction ("-12", "1234.5",
// ".5"). No exponents, no separators. Returns nullopt for anything else or
// when the value does not fit in 64-bit numerator/denominator.
std::optional<Rational> parse_decimal(std::string_view text);

// Terminating values print as decimals ("1234.5", "-3"), others as "p/q".
std::string format_decimal(const Rational& value);

} // namespace mpd

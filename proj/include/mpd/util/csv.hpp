#pragma once

#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace mpd::util {

// RFC 4180: fields containing a comma, quote, CR or LF are quoted with
// doubled quotes; records end in CRLF.
std::string csv_field(std::string_view field);
std::string csv_record(std::span<const std::string> fields);
std::string csv_record(std::initializer_list<std::string> fields);

// Shortest round-trip decimal form; empty for nullopt.
std::string format_number(double value);
std::string format_number(std::optional<double> value);

} // namespace mpd::util

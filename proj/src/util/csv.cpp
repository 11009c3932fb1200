#include "mpd/util/csv.hpp"

#include <charconv>
#include <vector>

namespace mpd::util {

std::string csv_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string csv_record(std::span<const std::string> fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_field(fields[i]);
    }
    out += "\r\n";
    return out;
}

std::string csv_record(std::initializer_list<std::string> fields) {
    return csv_record(std::span<const std::string>(fields.begin(), fields.size()));
}

std::string format_number(double value) {
    if (value == 0.0) value = 0.0;  // drop the sign of -0
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string format_number(std::optional<double> value) { return value ? format_number(*value) : std::string(); }

} // namespace mpd::util

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mpd::report {

// File names inside an artifact directory.
namespace files {
inline constexpr const char* pairs = "pairs.jsonl";
inline constexpr const char* skips = "skips.csv";
inline constexpr const char* settings = "settings.json";
inline constexpr const char* flips = "flips.jsonl";
inline constexpr const char* lens = "lens.jsonl";
inline constexpr const char* recovery = "recovery.jsonl";
inline constexpr const char* steering = "steering.mpdw";
inline constexpr const char* repair = "repair.json";
inline constexpr const char* report_dir = "report";
} // namespace files

// Throw IoError with the path in the message.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Compact dump; invalid UTF-8 (random models emit arbitrary bytes) is
// replaced with U+FFFD instead of throwing.
std::string dump_json(const nlohmann::json& j);
std::string dump_json_pretty(const nlohmann::json& j);

std::string to_jsonl(std::span<const nlohmann::json> lines);
std::vector<nlohmann::json> parse_jsonl(std::string_view text, std::string_view source);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

} // namespace mpd::report

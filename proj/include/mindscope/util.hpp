#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mindscope {

inline constexpr std::string_view kEngineVersion = "0.1.0";

/// Hex-encoded SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Calls `on_record(line_no, json)` for every non-blank line. Parse failures
/// raise RecordError carrying the 1-based line number.
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(std::size_t, const nlohmann::json&)>& on_record);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercases and collapses every run of non-alphanumerics to one space.
std::string normalize_phrase(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Position of the first case-insensitive occurrence of `needle`, or npos.
std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from = 0);

}  // namespace mindscope

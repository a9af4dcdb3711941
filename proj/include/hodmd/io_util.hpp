#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hodmd {

/// Round-trip decimal form of a double (17 significant digits).
std::string format_number(double value);

/// Strict decimal parse; rejects trailing garbage, NaN and infinities.
double parse_number(std::string_view text);

/// Writes to a sibling temporary and renames it into place, so a failed
/// write never leaves a truncated file at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split(std::string_view text, char separator);

}  // namespace hodmd

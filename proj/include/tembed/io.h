#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tembed {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Strict full-field parse; returns false on any trailing garbage.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// 64-bit FNV-1a, used for config hashes and report checksums.
uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t v);

}  // namespace tembed

#pragma once

// Internal file helpers shared by the module sources.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hostpred::detail {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char delimiter);
std::vector<std::string_view> split_whitespace(std::string_view text);
std::string_view trim(std::string_view text);

bool parse_double(std::string_view text, double& out);
bool parse_size(std::string_view text, std::size_t& out);

}  // namespace hostpred::detail

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sgraph::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
void append_double(std::string& out, double v);

/// Strict full-token parse; throws ParseError naming `what`.
double parse_double(std::string_view token, std::string_view what = "number");
std::int64_t parse_int(std::string_view token, std::string_view what = "integer");
std::uint64_t parse_uint(std::string_view token, std::string_view what = "integer");

/// Splits on runs of spaces/tabs.
std::vector<std::string_view> split_ws(std::string_view line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// FNV-1a 64-bit hash, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace sgraph::text

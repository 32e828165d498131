#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace specsyn::text {

// True when `bytes` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid_utf8(std::string_view bytes);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

// [A-Za-z0-9_]
inline bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Collapses runs of whitespace to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Reads a one-entry-per-line list file; blank lines and `#` comments skipped.
std::vector<std::string> read_list_file(const std::string& path);

}  // namespace specsyn::text

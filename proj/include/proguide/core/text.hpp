#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace proguide {

// Strips ASCII whitespace from both ends.
std::string trim(std::string_view text);

// ASCII case folding; bytes >= 0x80 pass through untouched.
std::string casefold(std::string_view text);

// Key used for phrase distinctness: trim + casefold.
std::string normalize_phrase(std::string_view text);

// Lower-cased word split. Word characters are ASCII alphanumerics and any
// byte of a multi-byte UTF-8 sequence; everything else separates words.
std::vector<std::string> split_words(std::string_view text);

// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(const std::vector<char32_t>& code_points);

std::size_t utf8_length(std::string_view text);

// Keeps the last `max_code_points` code points.
std::string truncate_utf8_tail(std::string_view text, std::size_t max_code_points);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t value);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split_lines(std::string_view text);

}  // namespace proguide

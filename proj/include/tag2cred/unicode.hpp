#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tag2cred::unicode {

/// Decodes UTF-8 into code points; malformed bytes become U+FFFD.
std::vector<char32_t> decode(std::string_view utf8);
std::string encode(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

bool is_alnum(char32_t cp);
bool is_space(char32_t cp);
/// Control (Cc) or format (Cf) characters, excluding whitespace controls.
bool is_control_or_format(char32_t cp);

/// NFKC normalization of a UTF-8 string.
std::string nfkc(std::string_view utf8);
/// Full Unicode lowercase mapping (root locale).
std::string to_lower(std::string_view utf8);

}  // namespace tag2cred::unicode

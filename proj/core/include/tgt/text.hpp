#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tgt::text {

std::string to_lower(std::string_view s);

// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(std::string_view s);

// Case-insensitive whole-word search. An alias may contain several words;
// boundaries are non-alphanumeric characters or string ends.
bool contains_word(std::string_view haystack, std::string_view word);

// Byte offset of the first whole-word occurrence, or npos.
std::size_t find_word(std::string_view haystack, std::string_view word);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace tgt::text

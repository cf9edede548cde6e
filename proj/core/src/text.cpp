#include "tgt/text.hpp"

#include <cctype>

namespace tgt::text {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

char lower(unsigned char c) { return static_cast<char>(std::tolower(c)); }

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(lower(c));
  return out;
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading whitespace is dropped
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(c));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::size_t find_word(std::string_view haystack, std::string_view word) {
  if (word.empty() || haystack.size() < word.size()) return std::string_view::npos;
  for (std::size_t i = 0; i + word.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < word.size(); ++j) {
      if (lower(static_cast<unsigned char>(haystack[i + j])) !=
          lower(static_cast<unsigned char>(word[j]))) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    const bool left_ok = i == 0 || !is_word_char(static_cast<unsigned char>(haystack[i - 1]));
    const std::size_t end = i + word.size();
    const bool right_ok =
        end == haystack.size() || !is_word_char(static_cast<unsigned char>(haystack[end]));
    if (left_ok && right_ok) return i;
  }
  return std::string_view::npos;
}

bool contains_word(std::string_view haystack, std::string_view word) {
  return find_word(haystack, word) != std::string_view::npos;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace tgt::text

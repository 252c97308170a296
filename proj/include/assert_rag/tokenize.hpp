#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

namespace assert_rag {

// Recorded in every report so score drift can be traced to tokenizer changes.
inline constexpr std::string_view kTokenizationVersion = "lex-v1";

namespace detail {

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences; treat them as word
// characters so non-ASCII identifiers stay intact.
inline bool is_word(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u == '_' ||
         u >= 0x80;
}

}  // namespace detail

/// Splits on whitespace, then splits each piece into runs of word characters
/// (alphanumerics and underscore) and single punctuation characters. Order and
/// multiplicity are preserved; case is preserved.
inline std::vector<std::string> lex_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (detail::is_space(c)) {
      ++i;
    } else if (detail::is_word(c)) {
      std::size_t j = i + 1;
      while (j < n && detail::is_word(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(1, c);
      ++i;
    }
  }
  return out;
}

/// Collapses whitespace runs to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char c : text) {
    if (detail::is_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

/// Whitespace-delimited pieces, used for token budgets at the pipeline level.
inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !detail::is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace assert_rag

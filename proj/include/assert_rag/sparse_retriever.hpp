#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "assert_rag/corpus.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

/// Deduplicated lexical tokens of one focal-test, kept sorted.
class TokenSet {
 public:
  TokenSet() = default;

  explicit TokenSet(std::vector<std::string> tokens, std::optional<PairId> source_id = std::nullopt)
      : tokens_(std::move(tokens)), source_id_(source_id) {
    std::erase(tokens_, std::string{});
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
  }

  [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  [[nodiscard]] std::optional<PairId> source_id() const noexcept { return source_id_; }
  [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
  [[nodiscard]] bool empty() const noexcept { return tokens_.empty(); }
  [[nodiscard]] bool contains(std::string_view tok) const {
    return std::binary_search(tokens_.begin(), tokens_.end(), tok);
  }

  friend bool operator==(const TokenSet& a, const TokenSet& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::optional<PairId> source_id_;
};

inline TokenSet lex_tokenize(std::string_view text, std::optional<PairId> source_id = std::nullopt) {
  return TokenSet(lex_tokens(text), source_id);
}

/// |a ∩ b| / |a ∪ b|. Both sides empty is undefined and rejected.
inline double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) throw Error(ErrorCode::BothEmpty, "jaccard of two empty token sets");
  const auto& x = a.tokens();
  const auto& y = b.tokens();
  std::size_t inter = 0;
  auto i = x.begin();
  auto j = y.begin();
  while (i != x.end() && j != y.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = x.size() + y.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Token sets for every codebase pair, precomputed once. Tokens are interned
/// to integer ids so a query scan is a merge over sorted integer arrays.
class SparseIndex {
 public:
  struct Entry {
    PairId id;
    TokenSet tokens;
  };

  /// A query interned against this index's vocabulary.
  struct Query {
    std::vector<std::uint32_t> known;  // sorted
    std::size_t unknown = 0;           // tokens absent from every entry

    [[nodiscard]] std::size_t size() const noexcept { return known.size() + unknown; }
  };

  explicit SparseIndex(const Corpus& corpus) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
    entries_.reserve(corpus.size());
    interned_.reserve(corpus.size());
    for (const auto& p : corpus.pairs) {
      Entry e{p.id, lex_tokenize(p.focal_test, p.id)};
      std::vector<std::uint32_t> ids;
      ids.reserve(e.tokens.size());
      for (const auto& t : e.tokens.tokens()) {
        auto [it, inserted] = vocab_.try_emplace(t, static_cast<std::uint32_t>(vocab_.size()));
        ids.push_back(it->second);
      }
      std::sort(ids.begin(), ids.end());
      interned_.push_back(std::move(ids));
      entries_.push_back(std::move(e));
    }
  }

  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t universe_size() const noexcept { return vocab_.size(); }

  [[nodiscard]] Query intern(const TokenSet& q) const {
    Query out;
    for (const auto& t : q.tokens()) {
      if (auto it = vocab_.find(t); it != vocab_.end())
        out.known.push_back(it->second);
      else
        ++out.unknown;
    }
    std::sort(out.known.begin(), out.known.end());
    return out;
  }

  /// Jaccard between an interned query and entry `pos`; equal to
  /// jaccard(query set, entries()[pos].tokens).
  [[nodiscard]] double score(const Query& q, std::size_t pos) const {
    const auto& e = interned_[pos];
    if (q.size() == 0 && e.empty())
      throw Error(ErrorCode::BothEmpty,
                  "empty query against empty entry " + std::to_string(entries_[pos].id));
    std::size_t inter = 0;
    auto i = q.known.begin();
    auto j = e.begin();
    while (i != q.known.end() && j != e.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        ++inter;
        ++i;
        ++j;
      }
    }
    const std::size_t uni = q.size() + e.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
  }

 private:
  std::vector<Entry> entries_;
  std::vector<std::vector<std::uint32_t>> interned_;
  std::unordered_map<std::string, std::uint32_t> vocab_;
};

inline SparseIndex build_sparse_index(const Corpus& corpus) { return SparseIndex(corpus); }

}  // namespace assert_rag

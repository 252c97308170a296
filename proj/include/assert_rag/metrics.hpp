#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "assert_rag/error.hpp"
#include "assert_rag/mini_ast.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

struct MatchVerdict {
  bool exact = false;
  std::vector<std::string> normalized_candidate;
  std::vector<std::string> normalized_reference;
};

/// Token-level exact match: both sides lexed into ordered token sequences.
inline MatchVerdict exact_match(std::string_view candidate, std::string_view reference) {
  MatchVerdict v;
  v.normalized_candidate = lex_tokens(candidate);
  v.normalized_reference = lex_tokens(reference);
  v.exact = v.normalized_candidate == v.normalized_reference;
  return v;
}

struct CodeBleuWeights {
  double ngram = 0.25;
  double weighted_ngram = 0.25;
  double syntax = 0.25;
  double dataflow = 0.25;

  void validate() const {
    const std::array<double, 4> w{ngram, weighted_ngram, syntax, dataflow};
    double sum = 0.0;
    for (const double x : w) {
      if (!std::isfinite(x) || x < 0.0) throw Error(ErrorCode::BadWeights, "weights must be finite and >= 0");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::BadWeights, "weights must sum to 1");
  }
};

struct CodeBleuParams {
  CodeBleuWeights weights;
  std::size_t max_n = 4;
  double keyword_weight = 4.0;  // relative to 1.0 for every other token
};

struct CodeBleuScore {
  double total = 0.0;
  double ngram = 0.0;
  double weighted_ngram = 0.0;
  double syntax = 0.0;
  double dataflow = 0.0;
  CodeBleuWeights weights;
};

/// Java reserved words plus the literals true/false/null.
inline bool is_java_keyword(std::string_view t) {
  static const std::unordered_set<std::string_view> kKeywords = {
      "abstract", "assert",     "boolean",  "break",     "byte",     "case",     "catch",        "char",
      "class",    "const",      "continue", "default",   "do",       "double",   "else",         "enum",
      "extends",  "final",      "finally",  "float",     "for",      "goto",     "if",           "implements",
      "import",   "instanceof", "int",      "interface", "long",     "native",   "new",          "package",
      "private",  "protected",  "public",   "return",    "short",    "static",   "strictfp",     "super",
      "switch",   "synchronized", "this",   "throw",     "throws",   "transient", "try",         "void",
      "volatile", "while",      "true",     "false",     "null",     "var",      "record",       "yield"};
  return kKeywords.contains(t);
}

namespace detail {

using Ngram = std::vector<std::string>;

inline std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++out[Ngram(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

inline double brevity_penalty(std::size_t cand_len, std::size_t ref_len) {
  if (cand_len == 0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

// Order-n precision with clipping. n = 1 is unsmoothed; n >= 2 uses add-one.
// When `unigram_weight` is given, unigram counts are weighted per token.
template <typename WeightFn>
double ngram_precision(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t n,
                       WeightFn unigram_weight) {
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  double matched = 0.0;
  double total = 0.0;
  for (const auto& [gram, count] : c) {
    const double w = n == 1 ? unigram_weight(gram.front()) : 1.0;
    total += w * static_cast<double>(count);
    if (auto it = r.find(gram); it != r.end()) matched += w * static_cast<double>(std::min(count, it->second));
  }
  if (n == 1) return total > 0.0 ? matched / total : 0.0;
  return (matched + 1.0) / (total + 1.0);
}

template <typename WeightFn>
double smoothed_bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t max_n,
                     WeightFn unigram_weight) {
  if (cand.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const double p = ngram_precision(cand, ref, n, unigram_weight);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  const double bleu = brevity_penalty(cand.size(), ref.size()) * std::exp(log_sum / static_cast<double>(max_n));
  return std::clamp(bleu, 0.0, 1.0);
}

// Structural signature of an internal node: kinds only, identifiers and
// literal values do not participate.
inline std::string collect_subtrees(const AstNode& n, std::vector<std::string>& out) {
  if (n.is_leaf()) return std::string(to_string(n.kind));
  std::string sig = "(";
  sig += to_string(n.kind);
  for (const auto& c : n.children) {
    sig += ' ';
    sig += collect_subtrees(c, out);
  }
  sig += ')';
  out.push_back(sig);
  return sig;
}

struct DataflowEdge {
  std::size_t var;         // variable index by first appearance
  std::size_t occurrence;  // 0 for the first occurrence
  NodeKind role;           // parent kind of this occurrence
  NodeKind origin_role;    // parent kind of the first occurrence
  auto operator<=>(const DataflowEdge&) const = default;
};

inline void collect_identifiers(const AstNode& n, NodeKind parent,
                                std::vector<std::pair<std::string, NodeKind>>& out) {
  if (n.kind == NodeKind::Identifier) {
    if (!n.is_callee) out.emplace_back(n.tokens.front(), parent);
    return;
  }
  if (n.kind == NodeKind::Unparsed) {
    for (const auto& t : n.tokens)
      if (is_word_token(t) && !is_digit_start(t) && !is_java_keyword(t)) out.emplace_back(t, NodeKind::Unparsed);
    return;
  }
  for (const auto& c : n.children) collect_identifiers(c, n.kind, out);
}

/// One edge per identifier occurrence, linked to the first occurrence of the
/// same name. Names are replaced by first-appearance indices.
inline std::vector<DataflowEdge> dataflow_edges(const AstNode& root) {
  std::vector<std::pair<std::string, NodeKind>> ids;
  collect_identifiers(root, NodeKind::Statement, ids);
  std::unordered_map<std::string, std::tuple<std::size_t, std::size_t, NodeKind>> seen;  // var, count, origin
  std::vector<DataflowEdge> edges;
  for (const auto& [name, role] : ids) {
    auto it = seen.find(name);
    if (it == seen.end()) it = seen.emplace(name, std::tuple{seen.size(), std::size_t{0}, role}).first;
    auto& [var, count, origin] = it->second;
    edges.push_back({var, count, role, origin});
    ++count;
  }
  return edges;
}

template <typename T>
std::size_t multiset_overlap(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t m = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++m;
      ++i;
      ++j;
    }
  }
  return m;
}

}  // namespace detail

/// Smoothed sentence BLEU over lexical tokens: unsmoothed unigram precision,
/// add-one smoothing for higher orders, standard brevity penalty.
inline double sentence_bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                            std::size_t max_n = 4) {
  return detail::smoothed_bleu(cand, ref, max_n, [](const std::string&) { return 1.0; });
}

/// BLEU with keyword unigrams weighted `keyword_weight`:1.
inline double keyword_weighted_bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                                    std::size_t max_n = 4, double keyword_weight = 4.0) {
  return detail::smoothed_bleu(cand, ref, max_n, [keyword_weight](const std::string& t) {
    return is_java_keyword(t) ? keyword_weight : 1.0;
  });
}

/// Fraction of the reference's internal subtrees (multiset) also present in
/// the candidate.
inline double syntax_match(const AstNode& cand, const AstNode& ref) {
  std::vector<std::string> c;
  std::vector<std::string> r;
  detail::collect_subtrees(cand, c);
  detail::collect_subtrees(ref, r);
  if (r.empty()) return c.empty() ? 1.0 : 0.0;
  return static_cast<double>(detail::multiset_overlap(std::move(c), r)) / static_cast<double>(r.size());
}

/// F1 over data-flow edges. Two edge-free statements agree perfectly.
inline double dataflow_match(const AstNode& cand, const AstNode& ref) {
  const auto c = detail::dataflow_edges(cand);
  const auto r = detail::dataflow_edges(ref);
  if (c.empty() && r.empty()) return 1.0;
  if (c.empty() || r.empty()) return 0.0;
  const auto m = static_cast<double>(detail::multiset_overlap(c, r));
  if (m == 0.0) return 0.0;
  const double p = m / static_cast<double>(c.size());
  const double rc = m / static_cast<double>(r.size());
  return 2.0 * p * rc / (p + rc);
}

inline CodeBleuScore codebleu(std::string_view candidate, std::string_view reference,
                              const CodeBleuParams& params = {}) {
  params.weights.validate();
  if (params.max_n < 1) throw Error(ErrorCode::Config, "max_n must be >= 1");
  const auto ref_toks = lex_tokens(reference);
  if (ref_toks.empty()) throw Error(ErrorCode::EmptyReference, "reference has no tokens");
  const auto cand_toks = lex_tokens(candidate);

  CodeBleuScore s;
  s.weights = params.weights;
  if (cand_toks.empty()) return s;

  s.ngram = sentence_bleu(cand_toks, ref_toks, params.max_n);
  s.weighted_ngram = keyword_weighted_bleu(cand_toks, ref_toks, params.max_n, params.keyword_weight);
  const auto cand_ast = parse_assertion(candidate);
  const auto ref_ast = parse_assertion(reference);
  s.syntax = syntax_match(cand_ast, ref_ast);
  s.dataflow = dataflow_match(cand_ast, ref_ast);
  const auto& w = params.weights;
  s.total = std::clamp(w.ngram * s.ngram + w.weighted_ngram * s.weighted_ngram + w.syntax * s.syntax +
                           w.dataflow * s.dataflow,
                       0.0, 1.0);
  return s;
}

}  // namespace assert_rag

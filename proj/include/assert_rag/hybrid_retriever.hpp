#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "assert_rag/corpus.hpp"
#include "assert_rag/dense_retriever.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/sparse_retriever.hpp"

namespace assert_rag {

enum class RetrievalMode { Hybrid, TokenOnly, EmbedOnly, None };

inline std::string_view to_string(RetrievalMode m) noexcept {
  switch (m) {
    case RetrievalMode::Hybrid: return "hybrid";
    case RetrievalMode::TokenOnly: return "token";
    case RetrievalMode::EmbedOnly: return "embed";
    case RetrievalMode::None: return "none";
  }
  return "hybrid";
}

inline std::optional<RetrievalMode> parse_mode(std::string_view s) noexcept {
  if (s == "hybrid") return RetrievalMode::Hybrid;
  if (s == "token" || s == "token_only") return RetrievalMode::TokenOnly;
  if (s == "embed" || s == "embed_only") return RetrievalMode::EmbedOnly;
  if (s == "none") return RetrievalMode::None;
  return std::nullopt;
}

struct HybridConfig {
  double lambda = 1.0;
  RetrievalMode mode = RetrievalMode::Hybrid;
  std::unordered_set<PairId> exclude_ids;
  bool exclude_exact_duplicates = false;

  void validate() const {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::Config, "lambda must be >= 0");
  }
};

/// Whether the query set is the codebase itself (retrieval while building
/// training data) or a held-out evaluation set.
enum class CorpusRole { Train, Eval };

struct RetrievalHit {
  PairId pair_id = 0;
  double sim = 0.0;
  std::optional<double> jac;  // absent in embed-only mode
  std::optional<double> cos;  // absent in token-only mode
  std::string retrieved_assertion;
};

inline double hybrid_score(double jac, double cos, double lambda) noexcept { return jac + lambda * cos; }

/// Scans a codebase with precomputed sparse and dense indexes. The dense side
/// (index and provider) may be omitted when only token-only or none modes are
/// used.
class HybridRetriever {
 public:
  HybridRetriever(const Corpus& codebase, const SparseIndex& sparse, const DenseIndex* dense = nullptr,
                  const EmbeddingProvider* provider = nullptr)
      : codebase_(&codebase), sparse_(&sparse), dense_(dense), provider_(provider) {
    if (sparse.size() != codebase.size())
      throw Error(ErrorCode::Config, "sparse index does not cover the codebase");
    for (std::size_t i = 0; i < codebase.size(); ++i)
      if (sparse.entries()[i].id != codebase.pairs[i].id)
        throw Error(ErrorCode::Config, "sparse index order differs from codebase");
    if (dense != nullptr) {
      if (dense->ids().size() != codebase.size())
        throw Error(ErrorCode::Config, "dense index does not cover the codebase");
      for (std::size_t i = 0; i < codebase.size(); ++i)
        if (dense->id_at(i) != codebase.pairs[i].id)
          throw Error(ErrorCode::Config, "dense index order differs from codebase");
      if (provider != nullptr && provider->dim() != dense->dim())
        throw Error(ErrorCode::DimMismatch, "provider dim " + std::to_string(provider->dim()) +
                                                " vs index dim " + std::to_string(dense->dim()));
    }
    for (const auto& p : codebase.pairs) by_content_[content_key(p.focal_test, p.assertion)].push_back(p.id);
  }

  [[nodiscard]] const Corpus& codebase() const noexcept { return *codebase_; }
  [[nodiscard]] bool has_dense() const noexcept { return dense_ != nullptr && provider_ != nullptr; }

  /// Exclusions for one query: the configured ids, the query itself when it
  /// comes from the codebase, and with exclude_exact_duplicates any codebase
  /// entry carrying the same (focal_test, assertion) during evaluation.
  [[nodiscard]] std::unordered_set<PairId> leakage_guard(const TestAssertPair& query, CorpusRole role,
                                                         const HybridConfig& cfg) const {
    auto out = cfg.exclude_ids;
    if (role == CorpusRole::Train) out.insert(query.id);
    if (cfg.exclude_exact_duplicates && role == CorpusRole::Eval) {
      if (auto it = by_content_.find(content_key(query.focal_test, query.assertion)); it != by_content_.end())
        out.insert(it->second.begin(), it->second.end());
    }
    return out;
  }

  /// Top-k hits by descending sim, ties broken by lower pair id.
  [[nodiscard]] std::vector<RetrievalHit> retrieve(std::string_view query, const HybridConfig& cfg, std::size_t k,
                                                   const std::unordered_set<PairId>& excluded) const {
    cfg.validate();
    if (k == 0) throw Error(ErrorCode::Config, "k must be >= 1");
    if (cfg.mode == RetrievalMode::None) return {};
    const bool use_jac = cfg.mode != RetrievalMode::EmbedOnly;
    const bool use_cos = cfg.mode != RetrievalMode::TokenOnly;
    if (use_cos && !has_dense())
      throw Error(ErrorCode::Config, std::string("mode ") + std::string(to_string(cfg.mode)) +
                                         " needs a dense index and embedding provider");

    SparseIndex::Query q_tokens;
    if (use_jac) q_tokens = sparse_->intern(lex_tokenize(query));
    EmbeddingVector q_vec;
    if (use_cos) q_vec = provider_->embed_one(std::string(query));

    struct Scored {
      double sim;
      double jac;
      double cos;
      std::size_t pos;
    };
    std::vector<Scored> scored;
    scored.reserve(codebase_->size());
    for (std::size_t pos = 0; pos < codebase_->size(); ++pos) {
      const PairId id = codebase_->pairs[pos].id;
      if (!excluded.empty() && excluded.contains(id)) continue;
      const double jac = use_jac ? sparse_->score(q_tokens, pos) : 0.0;
      const double cos = use_cos ? dense_->score(q_vec, pos) : 0.0;
      double sim = 0.0;
      switch (cfg.mode) {
        case RetrievalMode::Hybrid: sim = hybrid_score(jac, cos, cfg.lambda); break;
        case RetrievalMode::TokenOnly: sim = jac; break;
        case RetrievalMode::EmbedOnly: sim = cos; break;
        case RetrievalMode::None: break;
      }
      scored.push_back({sim, jac, cos, pos});
    }
    if (scored.empty()) throw Error(ErrorCode::EmptyCodebase, "every codebase entry is excluded");

    const auto better = [this](const Scored& a, const Scored& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      return codebase_->pairs[a.pos].id < codebase_->pairs[b.pos].id;
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

    std::vector<RetrievalHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const auto& s = scored[i];
      const auto& pair = codebase_->pairs[s.pos];
      RetrievalHit h;
      h.pair_id = pair.id;
      h.sim = s.sim;
      if (use_jac) h.jac = s.jac;
      if (use_cos) h.cos = s.cos;
      h.retrieved_assertion = pair.assertion;
      hits.push_back(std::move(h));
    }
    return hits;
  }

  [[nodiscard]] std::vector<RetrievalHit> retrieve(std::string_view query, const HybridConfig& cfg,
                                                   std::size_t k = 1) const {
    return retrieve(query, cfg, k, cfg.exclude_ids);
  }

  /// Retrieval for a known pair with the leakage guard applied.
  [[nodiscard]] std::vector<RetrievalHit> retrieve_for(const TestAssertPair& query, CorpusRole role,
                                                       const HybridConfig& cfg, std::size_t k = 1) const {
    return retrieve(query.focal_test, cfg, k, leakage_guard(query, role, cfg));
  }

 private:
  static std::string content_key(std::string_view focal, std::string_view assertion) {
    std::string key;
    key.reserve(focal.size() + assertion.size() + 1);
    key.append(focal);
    key.push_back('\x1f');
    key.append(assertion);
    return key;
  }

  const Corpus* codebase_;
  const SparseIndex* sparse_;
  const DenseIndex* dense_;
  const EmbeddingProvider* provider_;
  std::unordered_map<std::string, std::vector<PairId>> by_content_;
};

}  // namespace assert_rag

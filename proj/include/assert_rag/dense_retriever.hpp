#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "assert_rag/corpus.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

struct EmbeddingVector {
  std::vector<double> values;

  [[nodiscard]] std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// dot(a,b) / (|a||b|) accumulated in double and clamped to [-1, 1].
/// The denominator is sqrt(|a|^2 |b|^2) so that cosine(v, v) is exactly 1.
template <typename A, typename B>
double cosine(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = static_cast<double>(a[i]);
    const auto y = static_cast<double>(b[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroNorm, "cosine of a zero-norm vector");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(std::span<const double>(a.values), std::span<const double>(b.values));
}

/// Maps source text to fixed-dimension vectors. Implementations must be
/// deterministic and return exactly dim() entries per text.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  [[nodiscard]] virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;

  [[nodiscard]] EmbeddingVector embed_one(const std::string& text) const {
    auto out = embed(std::span<const std::string>(&text, 1));
    if (out.size() != 1)
      throw Error(ErrorCode::Protocol, name() + " returned " + std::to_string(out.size()) +
                                           " vectors for one text");
    return std::move(out.front());
  }
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Offline bag-of-tokens feature hashing: each lexical token (with
/// multiplicity) adds ±1 to one bucket, then the vector is L2-normalized.
/// Bucket and sign come from disjoint bits of one 64-bit hash of (seed, token).
class HashingEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;
  static constexpr std::uint64_t kDefaultSeed = 0;

  explicit HashingEmbedder(std::size_t dim = kDefaultDim, std::uint64_t seed = kDefaultSeed)
      : dim_(dim), seed_(seed) {
    if (dim < 8) throw Error(ErrorCode::Config, "hashing embedder needs dim >= 8");
  }

  [[nodiscard]] std::string name() const override {
    return "hashing-v1/dim=" + std::to_string(dim_) + "/seed=" + std::to_string(seed_);
  }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  [[nodiscard]] EmbeddingVector embed_text(std::string_view text) const {
    const auto tokens = lex_tokens(text);
    if (tokens.empty()) throw Error(ErrorCode::EmptyText, "no tokens to embed");
    std::vector<double> acc(dim_, 0.0);
    const std::uint64_t seed_mix = detail::splitmix64(seed_);
    for (const auto& tok : tokens) {
      const std::uint64_t h = detail::splitmix64(detail::fnv1a64(tok, seed_mix ^ 0xcbf29ce484222325ULL));
      const auto bucket = static_cast<std::size_t>((h & 0xffffffffULL) % dim_);
      acc[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm2 = 0.0;
    for (const double v : acc) norm2 += v * v;
    // Every token cancelled against another in its bucket; fall back to a
    // deterministic unit vector so the output stays usable.
    if (norm2 == 0.0) {
      acc[static_cast<std::size_t>(detail::fnv1a64(text) % dim_)] = 1.0;
      norm2 = 1.0;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : acc) v *= inv;
    return EmbeddingVector{std::move(acc)};
  }

  [[nodiscard]] std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// One float32 vector per codebase pair, in corpus order.
class DenseIndex {
 public:
  DenseIndex(std::string provider_name, std::size_t dim) : provider_name_(std::move(provider_name)), dim_(dim) {}

  void add(PairId id, const EmbeddingVector& v) {
    if (v.dim() != dim_)
      throw Error(ErrorCode::DimViolation, "pair " + std::to_string(id) + ": vector of length " +
                                               std::to_string(v.dim()) + ", expected " +
                                               std::to_string(dim_));
    for (const double x : v.values)
      if (!std::isfinite(x))
        throw Error(ErrorCode::DimViolation, "pair " + std::to_string(id) + ": non-finite entry");
    ids_.push_back(id);
    for (const double x : v.values) data_.push_back(static_cast<float>(x));
  }

  [[nodiscard]] const std::string& provider_name() const noexcept { return provider_name_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
  [[nodiscard]] PairId id_at(std::size_t pos) const { return ids_[pos]; }
  [[nodiscard]] const std::vector<PairId>& ids() const noexcept { return ids_; }
  [[nodiscard]] std::span<const float> vector_at(std::size_t pos) const {
    return std::span<const float>(data_).subspan(pos * dim_, dim_);
  }
  [[nodiscard]] const std::vector<float>& raw() const noexcept { return data_; }

  [[nodiscard]] double score(const EmbeddingVector& query, std::size_t pos) const {
    return cosine(std::span<const double>(query.values), vector_at(pos));
  }

  friend bool operator==(const DenseIndex&, const DenseIndex&) = default;

 private:
  std::string provider_name_;
  std::size_t dim_;
  std::vector<PairId> ids_;
  std::vector<float> data_;
};

/// Embeds every focal-test in batches. Provider failures are rethrown with
/// the ids of the batch that failed.
inline DenseIndex build_dense_index(const Corpus& corpus, const EmbeddingProvider& provider,
                                    std::size_t batch_size = 64) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  batch_size = std::max<std::size_t>(batch_size, 1);
  DenseIndex index(provider.name(), provider.dim());
  std::vector<std::string> texts;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    const std::size_t end = std::min(corpus.size(), start + batch_size);
    texts.clear();
    for (std::size_t i = start; i < end; ++i) texts.push_back(corpus.pairs[i].focal_test);
    std::vector<EmbeddingVector> vectors;
    try {
      vectors = provider.embed(texts);
    } catch (const Error& e) {
      const auto first = corpus.pairs[start].id;
      const auto last = corpus.pairs[end - 1].id;
      throw Error(e.code(), "while embedding pair " +
                                (first == last ? std::to_string(first)
                                               : std::to_string(first) + ".." + std::to_string(last)) +
                                ": " + e.what());
    }
    if (vectors.size() != end - start)
      throw Error(ErrorCode::Protocol, provider.name() + " returned " + std::to_string(vectors.size()) +
                                           " vectors for " + std::to_string(end - start) + " texts");
    for (std::size_t i = start; i < end; ++i) index.add(corpus.pairs[i].id, vectors[i - start]);
  }
  return index;
}

}  // namespace assert_rag

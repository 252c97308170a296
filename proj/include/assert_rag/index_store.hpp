#pragma once

// On-disk index directory:
//   manifest.json  embedder settings, dimensions, corpus fingerprint
//   corpus.jsonl   the codebase the index was built over
//   dense.bin      "ARDI" | u32 version | u64 count | u64 dim | i64 ids[count] | f32 data[count*dim]
// The sparse index is rebuilt from corpus.jsonl on load.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "assert_rag/corpus.hpp"
#include "assert_rag/dense_retriever.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/remote.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

struct EmbedderSpec {
  std::string kind = "hashing";  // hashing | remote
  std::size_t dim = HashingEmbedder::kDefaultDim;
  std::uint64_t seed = HashingEmbedder::kDefaultSeed;
  std::string endpoint;

  [[nodiscard]] std::unique_ptr<EmbeddingProvider> make() const {
    if (kind == "hashing") return std::make_unique<HashingEmbedder>(dim, seed);
    if (kind == "remote") return std::make_unique<RemoteEmbedder>(resolve_endpoint(endpoint));
    throw Error(ErrorCode::Config, "unknown embedder '" + kind + "'");
  }
};

inline std::string corpus_fingerprint(const Corpus& corpus) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a64(to_jsonl(corpus))));
  return buf;
}

struct IndexBundle {
  EmbedderSpec embedder;
  Corpus corpus;
  DenseIndex dense{"", 0};
};

namespace detail {

inline constexpr char kDenseMagic[4] = {'A', 'R', 'D', 'I'};
inline constexpr std::uint32_t kDenseVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(ErrorCode::Io, path.string() + ": truncated");
  return v;
}

}  // namespace detail

inline void save_dense(const DenseIndex& dense, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open for writing " + path.string());
  out.write(detail::kDenseMagic, 4);
  detail::write_pod(out, detail::kDenseVersion);
  detail::write_pod(out, static_cast<std::uint64_t>(dense.size()));
  detail::write_pod(out, static_cast<std::uint64_t>(dense.dim()));
  out.write(reinterpret_cast<const char*>(dense.ids().data()),
            static_cast<std::streamsize>(dense.ids().size() * sizeof(PairId)));
  out.write(reinterpret_cast<const char*>(dense.raw().data()),
            static_cast<std::streamsize>(dense.raw().size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline DenseIndex load_dense(const std::filesystem::path& path, const std::string& provider_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, detail::kDenseMagic, 4) != 0)
    throw Error(ErrorCode::Io, path.string() + ": not a dense index file");
  if (detail::read_pod<std::uint32_t>(in, path) != detail::kDenseVersion)
    throw Error(ErrorCode::Io, path.string() + ": unsupported dense index version");
  const auto count = detail::read_pod<std::uint64_t>(in, path);
  const auto dim = detail::read_pod<std::uint64_t>(in, path);
  std::vector<PairId> ids(count);
  std::vector<float> data(count * dim);
  if (!in.read(reinterpret_cast<char*>(ids.data()), static_cast<std::streamsize>(count * sizeof(PairId))) ||
      !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * dim * sizeof(float))))
    throw Error(ErrorCode::Io, path.string() + ": truncated");
  DenseIndex dense(provider_name, dim);
  EmbeddingVector v;
  v.values.resize(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint64_t k = 0; k < dim; ++k) v.values[k] = data[i * dim + k];
    dense.add(ids[i], v);
  }
  return dense;
}

inline void save_index_dir(const std::filesystem::path& dir, const Corpus& corpus, const DenseIndex& dense,
                           const EmbedderSpec& spec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  save_jsonl(corpus, dir / "corpus.jsonl");
  save_dense(dense, dir / "dense.bin");
  nlohmann::json manifest{{"format", "assert-rag-index"},
                          {"version", 1},
                          {"embedder", spec.kind},
                          {"dim", dense.dim()},
                          {"seed", spec.seed},
                          {"endpoint", spec.endpoint},
                          {"provider_name", dense.provider_name()},
                          {"corpus_size", corpus.size()},
                          {"corpus_fingerprint", corpus_fingerprint(corpus)},
                          {"tokenization_version", std::string(kTokenizationVersion)}};
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline IndexBundle load_index_dir(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Io, (dir / "manifest.json").string() + ": " + e.what());
  }
  if (manifest.value("format", std::string{}) != "assert-rag-index")
    throw Error(ErrorCode::Io, dir.string() + " is not an index directory");
  IndexBundle b;
  b.embedder.kind = manifest.value("embedder", std::string("hashing"));
  b.embedder.dim = manifest.value("dim", HashingEmbedder::kDefaultDim);
  b.embedder.seed = manifest.value("seed", std::uint64_t{0});
  b.embedder.endpoint = manifest.value("endpoint", std::string{});
  b.corpus = load_jsonl(dir / "corpus.jsonl");
  b.dense = load_dense(dir / "dense.bin", manifest.value("provider_name", std::string{}));
  if (corpus_fingerprint(b.corpus) != manifest.value("corpus_fingerprint", std::string{}))
    throw Error(ErrorCode::Io, dir.string() + ": corpus.jsonl does not match the manifest fingerprint");
  return b;
}

}  // namespace assert_rag

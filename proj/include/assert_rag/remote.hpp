#pragma once

// HTTP clients for the embedding (/v1/embed) and generation (/v1/generate)
// wire protocols. Only plain http:// endpoints are supported.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "assert_rag/augment.hpp"
#include "assert_rag/dense_retriever.hpp"
#include "assert_rag/error.hpp"

namespace assert_rag {

inline constexpr const char* kEndpointEnv = "ASSERT_RAG_ENDPOINT";

/// ASSERT_RAG_ENDPOINT wins over whatever was passed on the command line.
inline std::string resolve_endpoint(const std::string& flag_value) {
  if (const char* env = std::getenv(kEndpointEnv); env != nullptr && *env != '\0') return env;
  return flag_value;
}

struct Endpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // optional path prefix without trailing slash

  static Endpoint parse(const std::string& url) {
    if (url.empty()) throw Error(ErrorCode::Config, "no endpoint configured (set --endpoint or ASSERT_RAG_ENDPOINT)");
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http")
      throw Error(ErrorCode::Config, "endpoint must be an http:// URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.base = url.substr(0, path_start);
    if (path_start != std::string::npos) {
      ep.prefix = url.substr(path_start);
      while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    }
    return ep;
  }

  [[nodiscard]] std::string url() const { return base + prefix; }
};

struct HttpOptions {
  std::chrono::seconds connect_timeout{5};
  std::chrono::seconds read_timeout{300};
};

namespace detail {

inline nlohmann::json post_json(const Endpoint& ep, const std::string& path, const nlohmann::json& body,
                                const HttpOptions& opts) {
  httplib::Client cli(ep.base);
  cli.set_connection_timeout(opts.connect_timeout);
  cli.set_read_timeout(opts.read_timeout);
  const auto full = ep.prefix + path;
  auto res = cli.Post(full, body.dump(), "application/json");
  if (!res)
    throw Error(ErrorCode::Transport, ep.url() + path + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::Transport,
                ep.url() + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Protocol, ep.url() + path + ": response is not JSON: " + e.what());
  }
}

}  // namespace detail

/// Client for an embedding service. Texts are sent in batches; every vector
/// must have the length declared in the response and, once known, the same
/// length as every previous response.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(const std::string& url, std::optional<std::size_t> dim = std::nullopt,
                          std::size_t batch_size = 32, HttpOptions opts = {})
      : endpoint_(Endpoint::parse(url)), batch_size_(batch_size ? batch_size : 1), opts_(opts), dim_(dim) {}

  [[nodiscard]] std::string name() const override { return "remote@" + endpoint_.url(); }

  /// Probes the service with a one-text request when no dimension was given.
  [[nodiscard]] std::size_t dim() const override {
    {
      std::lock_guard lock(mu_);
      if (dim_) return *dim_;
    }
    (void)embed_one("probe");
    std::lock_guard lock(mu_);
    return *dim_;
  }

  [[nodiscard]] std::string served_provider() const {
    std::lock_guard lock(mu_);
    return served_provider_;
  }

  [[nodiscard]] std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
      const auto batch = texts.subspan(start, std::min(batch_size_, texts.size() - start));
      auto vectors = embed_batch(batch);
      for (auto& v : vectors) out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const {
    nlohmann::json req{{"texts", nlohmann::json::array()}};
    for (const auto& t : texts) req["texts"].push_back(t);
    const auto res = detail::post_json(endpoint_, "/v1/embed", req, opts_);
    const auto where = endpoint_.url() + "/v1/embed";

    if (!res.is_object() || !res.contains("vectors") || !res["vectors"].is_array() ||
        !res.contains("dim") || !res["dim"].is_number_integer())
      throw Error(ErrorCode::Protocol, where + ": response lacks 'vectors' array or integer 'dim'");
    const auto& vecs = res["vectors"];
    if (vecs.size() != texts.size())
      throw Error(ErrorCode::Protocol, where + ": " + std::to_string(vecs.size()) + " vectors for " +
                                           std::to_string(texts.size()) + " texts");
    const auto declared = res["dim"].get<std::int64_t>();
    if (declared <= 0) throw Error(ErrorCode::Protocol, where + ": non-positive dim");
    {
      std::lock_guard lock(mu_);
      if (!dim_) dim_ = static_cast<std::size_t>(declared);
      if (*dim_ != static_cast<std::size_t>(declared))
        throw Error(ErrorCode::DimViolation, where + ": declared dim " + std::to_string(declared) +
                                                 ", expected " + std::to_string(*dim_));
      if (res.contains("provider") && res["provider"].is_string())
        served_provider_ = res["provider"].get<std::string>();
    }

    std::vector<EmbeddingVector> out;
    out.reserve(vecs.size());
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      const auto& v = vecs[i];
      if (!v.is_array()) throw Error(ErrorCode::Protocol, where + ": vector " + std::to_string(i) + " is not an array");
      if (v.size() != static_cast<std::size_t>(declared))
        throw Error(ErrorCode::DimViolation, where + ": vector " + std::to_string(i) + " has length " +
                                                 std::to_string(v.size()) + ", declared " +
                                                 std::to_string(declared));
      EmbeddingVector ev;
      ev.values.reserve(v.size());
      for (const auto& x : v) {
        if (!x.is_number()) throw Error(ErrorCode::Protocol, where + ": non-numeric vector entry");
        const auto d = x.get<double>();
        if (!std::isfinite(d)) throw Error(ErrorCode::Protocol, where + ": non-finite vector entry");
        ev.values.push_back(d);
      }
      out.push_back(std::move(ev));
    }
    return out;
  }

  Endpoint endpoint_;
  std::size_t batch_size_;
  HttpOptions opts_;
  mutable std::mutex mu_;
  mutable std::optional<std::size_t> dim_;
  mutable std::string served_provider_;
};

/// Client for a generation service. Responses are checked against the
/// protocol: one candidate list per source, at most num_candidates entries,
/// scores non-increasing, each text within max_output_tokens whitespace tokens.
class RemoteGenerator final : public GeneratorBackend {
 public:
  explicit RemoteGenerator(const std::string& url, std::size_t batch_size = 8, HttpOptions opts = {})
      : endpoint_(Endpoint::parse(url)), batch_size_(batch_size ? batch_size : 1), opts_(opts) {}

  [[nodiscard]] std::string name() const override { return "remote@" + endpoint_.url(); }
  [[nodiscard]] std::string_view kind() const override { return "remote"; }

  [[nodiscard]] std::vector<std::vector<CandidateAssertion>> generate_batch(
      std::span<const AugmentedInput> inputs, std::size_t num_candidates,
      std::size_t max_output_tokens) const override {
    if (num_candidates == 0) throw Error(ErrorCode::Config, "num_candidates must be >= 1");
    std::vector<std::vector<CandidateAssertion>> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += batch_size_) {
      const auto batch = inputs.subspan(start, std::min(batch_size_, inputs.size() - start));
      auto lists = request(batch, num_candidates, max_output_tokens);
      for (auto& l : lists) out.push_back(std::move(l));
    }
    return out;
  }

 private:
  std::vector<std::vector<CandidateAssertion>> request(std::span<const AugmentedInput> inputs,
                                                       std::size_t num_candidates,
                                                       std::size_t max_output_tokens) const {
    nlohmann::json req{{"sources", nlohmann::json::array()},
                       {"num_candidates", num_candidates},
                       {"max_output_tokens", max_output_tokens}};
    for (const auto& in : inputs) req["sources"].push_back(in.text);
    const auto res = detail::post_json(endpoint_, "/v1/generate", req, opts_);
    const auto where = endpoint_.url() + "/v1/generate";

    if (!res.is_object() || !res.contains("candidates") || !res["candidates"].is_array())
      throw Error(ErrorCode::Protocol, where + ": response lacks 'candidates' array");
    const auto& lists = res["candidates"];
    if (lists.size() != inputs.size())
      throw Error(ErrorCode::Protocol, where + ": " + std::to_string(lists.size()) + " candidate lists for " +
                                           std::to_string(inputs.size()) + " sources");
    std::vector<std::vector<CandidateAssertion>> out;
    out.reserve(lists.size());
    for (std::size_t i = 0; i < lists.size(); ++i) {
      const auto& list = lists[i];
      const auto tag = where + ": query " + std::to_string(inputs[i].query_id);
      if (!list.is_array()) throw Error(ErrorCode::Protocol, tag + ": candidate list is not an array");
      if (list.size() > num_candidates)
        throw Error(ErrorCode::Protocol, tag + ": " + std::to_string(list.size()) + " candidates, asked for " +
                                             std::to_string(num_candidates));
      std::vector<CandidateAssertion> cands;
      for (std::size_t r = 0; r < list.size(); ++r) {
        const auto& c = list[r];
        if (!c.is_object() || !c.contains("text") || !c["text"].is_string() || !c.contains("score") ||
            !c["score"].is_number())
          throw Error(ErrorCode::Protocol, tag + ": candidate needs string 'text' and numeric 'score'");
        CandidateAssertion ca{normalize_whitespace(c["text"].get<std::string>()), c["score"].get<double>(), r + 1};
        if (!std::isfinite(ca.score)) throw Error(ErrorCode::Protocol, tag + ": non-finite score");
        if (!cands.empty() && ca.score > cands.back().score)
          throw Error(ErrorCode::Protocol, tag + ": candidates not sorted by descending score");
        if (whitespace_tokens(ca.text).size() > max_output_tokens)
          throw Error(ErrorCode::Protocol, tag + ": candidate exceeds " + std::to_string(max_output_tokens) +
                                               " output tokens");
        cands.push_back(std::move(ca));
      }
      out.push_back(std::move(cands));
    }
    return out;
  }

  Endpoint endpoint_;
  std::size_t batch_size_;
  HttpOptions opts_;
};

}  // namespace assert_rag

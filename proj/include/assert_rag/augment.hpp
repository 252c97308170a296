#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "assert_rag/corpus.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/hybrid_retriever.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

inline constexpr std::string_view kDefaultSeparator = "[RET_ASSERT]";
inline constexpr std::size_t kDefaultInputBudget = 512;
inline constexpr std::size_t kDefaultOutputBudget = 256;
inline constexpr std::size_t kMinInputBudget = 16;

struct AugmentedInput {
  std::string text;
  PairId query_id = 0;
  std::optional<PairId> retrieved_id;
  std::optional<std::string> retrieved_assertion;
  bool truncated = false;
  std::size_t token_budget = kDefaultInputBudget;
};

/// focal_test ⊕ separator ⊕ retrieved assertion, right-truncated to
/// `token_budget` whitespace tokens. Without a hit the text is the focal-test.
inline AugmentedInput augment(std::string_view focal_test, const std::optional<RetrievalHit>& retrieved,
                              std::string_view separator = kDefaultSeparator,
                              std::size_t token_budget = kDefaultInputBudget, PairId query_id = 0) {
  if (token_budget < kMinInputBudget)
    throw Error(ErrorCode::BudgetTooSmall,
                "token budget " + std::to_string(token_budget) + " < " + std::to_string(kMinInputBudget));
  const auto focal = normalize_whitespace(focal_test);
  if (focal.empty()) throw Error(ErrorCode::EmptyText, "empty focal-test");

  AugmentedInput out;
  out.query_id = query_id;
  out.token_budget = token_budget;
  std::string full = focal;
  if (retrieved) {
    out.retrieved_id = retrieved->pair_id;
    out.retrieved_assertion = retrieved->retrieved_assertion;
    full += ' ';
    full += separator;
    full += ' ';
    full += retrieved->retrieved_assertion;
  }
  auto tokens = whitespace_tokens(full);
  if (tokens.size() > token_budget) {
    tokens.resize(token_budget);
    out.truncated = true;
  }
  out.text = join(tokens);
  return out;
}

struct CandidateAssertion {
  std::string text;
  double score = 0.0;  // higher is better; comparable only within one response
  std::size_t rank = 1;
};

/// Produces ranked candidates for augmented inputs. Implementations must be
/// deterministic for fixed inputs and decoding parameters.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::string_view kind() const = 0;
  /// Echo needs a retrieved assertion to return; remote backends do not.
  [[nodiscard]] virtual bool requires_retrieval() const { return false; }

  [[nodiscard]] virtual std::vector<std::vector<CandidateAssertion>> generate_batch(
      std::span<const AugmentedInput> inputs, std::size_t num_candidates, std::size_t max_output_tokens) const = 0;

  [[nodiscard]] std::vector<CandidateAssertion> generate(const AugmentedInput& input, std::size_t num_candidates,
                                                         std::size_t max_output_tokens) const {
    auto out = generate_batch(std::span<const AugmentedInput>(&input, 1), num_candidates, max_output_tokens);
    if (out.size() != 1) throw Error(ErrorCode::Protocol, name() + " returned a batch of the wrong size");
    return std::move(out.front());
  }
};

/// Returns the retrieved assertion verbatim: retrieval as generation.
class EchoBackend final : public GeneratorBackend {
 public:
  [[nodiscard]] std::string name() const override { return "echo"; }
  [[nodiscard]] std::string_view kind() const override { return "echo"; }
  [[nodiscard]] bool requires_retrieval() const override { return true; }

  [[nodiscard]] std::vector<std::vector<CandidateAssertion>> generate_batch(
      std::span<const AugmentedInput> inputs, std::size_t num_candidates, std::size_t) const override {
    if (num_candidates == 0) throw Error(ErrorCode::Config, "num_candidates must be >= 1");
    std::vector<std::vector<CandidateAssertion>> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (!in.retrieved_id || !in.retrieved_assertion)
        throw Error(ErrorCode::EchoWithoutRetrieval,
                    "query " + std::to_string(in.query_id) + " has no retrieved assertion");
      out.push_back({CandidateAssertion{*in.retrieved_assertion, 0.0, 1}});
    }
    return out;
  }
};

inline const CandidateAssertion& select_top(std::span<const CandidateAssertion> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "backend returned no candidates");
  for (const auto& c : candidates)
    if (c.rank == 1) return c;
  return candidates.front();
}

/// One line of the fine-tuning export consumed by the model service.
struct TrainingRecord {
  PairId id = 0;
  std::string source;
  std::string target;
  std::string separator;

  [[nodiscard]] nlohmann::json to_json() const {
    return nlohmann::json{{"id", id}, {"source", source}, {"target", target}, {"separator", separator}};
  }
};

}  // namespace assert_rag

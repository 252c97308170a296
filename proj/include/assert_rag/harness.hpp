#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "assert_rag/augment.hpp"
#include "assert_rag/corpus.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/hybrid_retriever.hpp"
#include "assert_rag/metrics.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

struct EvalConfig {
  HybridConfig retrieval;
  /// Treat the eval set as the codebase itself and drop each query's own id.
  bool self_exclude = false;
  std::string separator{kDefaultSeparator};
  std::size_t input_budget = kDefaultInputBudget;
  std::size_t num_candidates = 1;
  std::size_t max_output_tokens = kDefaultOutputBudget;
  CodeBleuParams metric;
  bool skip_errors = false;
  std::size_t parallelism = 1;
  // Recorded in the report only.
  std::string embedder = "none";
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json snapshot(const GeneratorBackend& backend) const {
    return nlohmann::json{
        {"mode", std::string(to_string(retrieval.mode))},
        {"lambda", retrieval.lambda},
        {"top_k", 1},
        {"exclude_duplicates", retrieval.exclude_exact_duplicates},
        {"self_exclude", self_exclude},
        {"separator", separator},
        {"input_budget", input_budget},
        {"num_candidates", num_candidates},
        {"max_output_tokens", max_output_tokens},
        {"codebleu_weights",
         {metric.weights.ngram, metric.weights.weighted_ngram, metric.weights.syntax, metric.weights.dataflow}},
        {"codebleu_max_n", metric.max_n},
        {"codebleu_keyword_weight", metric.keyword_weight},
        {"codebleu_smoothing", "add-one for n>=2"},
        {"backend", backend.name()},
        {"embedder", embedder},
        {"seed", seed},
        {"tokenization_version", std::string(kTokenizationVersion)},
    };
  }
};

struct EvalRecord {
  PairId query_id = 0;
  std::string prediction;
  std::string reference;
  bool exact = false;
  double codebleu_total = 0.0;
  AssertType assert_type = AssertType::Other;
  std::optional<PairId> retrieved_id;
  std::optional<double> jac;
  std::optional<double> cos;
  std::optional<double> sim;
  std::optional<std::string> error;  // set only when run with skip_errors
};

struct TypeTally {
  std::size_t correct = 0;
  std::size_t total = 0;
  friend bool operator==(const TypeTally&, const TypeTally&) = default;
};

struct EvalReport {
  std::string run_name;
  nlohmann::json config;
  std::vector<EvalRecord> records;
  double accuracy = 0.0;
  double codebleu_mean = 0.0;
  std::map<AssertType, TypeTally> per_type;
  double elapsed_seconds = 0.0;  // wall clock, not part of the canonical form

  [[nodiscard]] std::size_t exact_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.exact; }));
  }
};

/// Recomputes accuracy, mean CodeBLEU and per-type tallies from the records.
inline void compute_aggregates(EvalReport& report) {
  report.per_type.clear();
  for (const auto t : kAllAssertTypes) report.per_type[t] = {};
  std::size_t exact = 0;
  double cb_sum = 0.0;
  for (const auto& r : report.records) {
    auto& tally = report.per_type[r.assert_type];
    ++tally.total;
    if (r.exact) {
      ++tally.correct;
      ++exact;
    }
    cb_sum += r.codebleu_total;
  }
  const auto n = static_cast<double>(report.records.size());
  report.accuracy = report.records.empty() ? 0.0 : static_cast<double>(exact) / n;
  report.codebleu_mean = report.records.empty() ? 0.0 : cb_sum / n;
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// stops further scheduling and is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// retrieve → augment → generate → select → score for every eval pair.
/// Records are ordered by query id regardless of completion order.
inline EvalReport run_eval(const Corpus& eval_corpus, const HybridRetriever& retriever,
                           const GeneratorBackend& backend, const EvalConfig& cfg, const std::string& run_name) {
  cfg.retrieval.validate();
  cfg.metric.weights.validate();
  if (backend.requires_retrieval() && cfg.retrieval.mode == RetrievalMode::None)
    throw Error(ErrorCode::Config, "backend '" + backend.name() + "' needs retrieval; mode none is not allowed");
  if (cfg.num_candidates == 0) throw Error(ErrorCode::Config, "num_candidates must be >= 1");

  const auto started = std::chrono::steady_clock::now();
  const CorpusRole role = cfg.self_exclude ? CorpusRole::Train : CorpusRole::Eval;
  std::vector<EvalRecord> records(eval_corpus.size());

  detail::parallel_for(eval_corpus.size(), cfg.parallelism, [&](std::size_t i) {
    const auto& q = eval_corpus.pairs[i];
    EvalRecord rec;
    rec.query_id = q.id;
    rec.reference = q.assertion;
    rec.assert_type = classify_assertion(q.assertion);
    try {
      std::optional<RetrievalHit> hit;
      if (cfg.retrieval.mode != RetrievalMode::None) {
        auto hits = retriever.retrieve_for(q, role, cfg.retrieval, 1);
        if (!hits.empty()) hit = std::move(hits.front());
      }
      if (hit) {
        rec.retrieved_id = hit->pair_id;
        rec.jac = hit->jac;
        rec.cos = hit->cos;
        rec.sim = hit->sim;
      }
      const auto input = augment(q.focal_test, hit, cfg.separator, cfg.input_budget, q.id);
      const auto candidates = backend.generate(input, cfg.num_candidates, cfg.max_output_tokens);
      rec.prediction = select_top(candidates).text;
      rec.exact = exact_match(rec.prediction, rec.reference).exact;
      rec.codebleu_total = codebleu(rec.prediction, rec.reference, cfg.metric).total;
    } catch (const Error& e) {
      if (!cfg.skip_errors) throw Error(e.code(), "query " + std::to_string(q.id) + ": " + e.what());
      rec.prediction.clear();
      rec.exact = false;
      rec.codebleu_total = 0.0;
      rec.error = e.what();
    }
    records[i] = std::move(rec);
  });

  std::stable_sort(records.begin(), records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.query_id < b.query_id; });

  EvalReport report;
  report.run_name = run_name;
  report.config = cfg.snapshot(backend);
  report.records = std::move(records);
  compute_aggregates(report);
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

/// Writes one training record per train pair, retrieving over the train
/// corpus itself with the query's own id excluded. Returns the count written.
inline std::size_t export_training_set(const Corpus& train_corpus, const HybridRetriever& retriever,
                                       const HybridConfig& cfg, const std::string& separator, std::size_t budget,
                                       const std::filesystem::path& out_path) {
  cfg.validate();
  std::string out;
  for (const auto& p : train_corpus.pairs) {
    std::optional<RetrievalHit> hit;
    if (cfg.mode != RetrievalMode::None) {
      auto hits = retriever.retrieve_for(p, CorpusRole::Train, cfg, 1);
      if (!hits.empty()) hit = std::move(hits.front());
    }
    const auto input = augment(p.focal_test, hit, separator, budget, p.id);
    out += TrainingRecord{p.id, input.text, p.assertion, separator}.to_json().dump();
    out += '\n';
  }
  detail::write_file(out_path, out);
  return train_corpus.size();
}

struct OverlapReport {
  struct Cell {
    std::vector<std::size_t> runs;  // indices into run_names
    std::size_t count = 0;
  };

  std::vector<std::string> run_names;
  std::vector<Cell> cells;           // every non-empty subset, by bitmask order
  std::vector<std::size_t> unique;   // correct only in run i
  std::vector<std::size_t> correct;  // #correct in run i
  std::size_t correct_in_any = 0;
  std::size_t correct_in_all = 0;
  std::size_t queries = 0;
};

inline constexpr std::size_t kMaxOverlapRuns = 16;

/// Venn-cell counts over the sets of exactly-correct query ids. Cell counts
/// are for "correct in exactly these runs".
inline OverlapReport overlap(const std::vector<const EvalReport*>& reports) {
  if (reports.empty()) throw Error(ErrorCode::Config, "overlap needs at least one report");
  if (reports.size() > kMaxOverlapRuns)
    throw Error(ErrorCode::Config, "overlap supports at most " + std::to_string(kMaxOverlapRuns) + " runs");

  const auto ids_of = [](const EvalReport& r) {
    std::vector<PairId> ids;
    for (const auto& rec : r.records) ids.push_back(rec.query_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  const auto base_ids = ids_of(*reports.front());
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (ids_of(*reports[i]) != base_ids)
      throw Error(ErrorCode::IdSetMismatch,
                  "run '" + reports[i]->run_name + "' covers a different query-id set than '" +
                      reports.front()->run_name + "'");

  const std::size_t n = reports.size();
  std::map<PairId, std::uint32_t> mask;
  for (const auto id : base_ids) mask[id] = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& rec : reports[i]->records)
      if (rec.exact) mask[rec.query_id] |= (1u << i);

  OverlapReport out;
  out.queries = base_ids.size();
  out.unique.assign(n, 0);
  out.correct.assign(n, 0);
  for (const auto* r : reports) out.run_names.push_back(r->run_name);
  std::vector<std::size_t> by_mask(std::size_t{1} << n, 0);
  for (const auto& [id, m] : mask) ++by_mask[m];
  const std::uint32_t all = (n == 32 ? ~0u : ((1u << n) - 1));
  for (std::uint32_t m = 1; m < by_mask.size(); ++m) {
    OverlapReport::Cell cell;
    for (std::size_t i = 0; i < n; ++i) {
      if (m & (1u << i)) {
        cell.runs.push_back(i);
        out.correct[i] += by_mask[m];
      }
    }
    cell.count = by_mask[m];
    out.correct_in_any += cell.count;
    if (cell.runs.size() == 1) out.unique[cell.runs.front()] = cell.count;
    if (m == all) out.correct_in_all = cell.count;
    out.cells.push_back(std::move(cell));
  }
  return out;
}

inline OverlapReport overlap(const std::vector<EvalReport>& reports) {
  std::vector<const EvalReport*> ptrs;
  for (const auto& r : reports) ptrs.push_back(&r);
  return overlap(ptrs);
}

}  // namespace assert_rag

// Command-line front end: ingest, index, retrieve, export-train, generate,
// evaluate, overlap, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "assert_rag/assert_rag.hpp"

namespace fs = std::filesystem;
using namespace assert_rag;

namespace {

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    detail::write_file(path, content);
  }
}

RetrievalMode mode_from(const std::string& s) {
  const auto m = parse_mode(s);
  if (!m) throw Error(ErrorCode::Config, "unknown mode '" + s + "'");
  return *m;
}

bool needs_embeddings(RetrievalMode m) { return m == RetrievalMode::Hybrid || m == RetrievalMode::EmbedOnly; }

/// Everything a retriever borrows, kept alive together.
struct Retrieval {
  Corpus codebase;
  EmbedderSpec spec;
  std::unique_ptr<EmbeddingProvider> provider;
  std::optional<SparseIndex> sparse;
  std::optional<DenseIndex> dense;
  std::optional<HybridRetriever> retriever;

  void finish(RetrievalMode mode) {
    sparse.emplace(build_sparse_index(codebase));
    const bool dense_ready = dense.has_value();
    if (needs_embeddings(mode)) {
      provider = spec.make();
      if (!dense_ready) dense.emplace(build_dense_index(codebase, *provider));
      retriever.emplace(codebase, *sparse, &*dense, provider.get());
    } else {
      retriever.emplace(codebase, *sparse);
    }
  }
};

std::unique_ptr<Retrieval> open_index(const std::string& dir, RetrievalMode mode,
                                      const std::optional<std::string>& corpus_path) {
  auto r = std::make_unique<Retrieval>();
  auto bundle = load_index_dir(dir);
  if (corpus_path) {
    const auto given = load_jsonl(*corpus_path);
    if (corpus_fingerprint(given) != corpus_fingerprint(bundle.corpus))
      throw Error(ErrorCode::Config, *corpus_path + " is not the corpus the index in " + dir + " was built from");
  }
  r->codebase = std::move(bundle.corpus);
  r->spec = bundle.embedder;
  r->dense.emplace(std::move(bundle.dense));
  r->finish(mode);
  return r;
}

std::unique_ptr<GeneratorBackend> make_backend(const std::string& kind, const std::string& endpoint) {
  if (kind == "echo") return std::make_unique<EchoBackend>();
  if (kind == "remote") return std::make_unique<RemoteGenerator>(resolve_endpoint(endpoint));
  throw Error(ErrorCode::Config, "unknown backend '" + kind + "'");
}

/// Query files are either jsonl pair records or one focal test per line.
std::vector<TestAssertPair> load_queries(const std::string& path) {
  if (fs::path(path).extension() == ".jsonl") return load_jsonl(path).pairs;
  std::vector<TestAssertPair> out;
  const auto lines = detail::read_text_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto text = normalize_whitespace(lines[i]);
    if (text.empty()) continue;
    out.push_back({static_cast<PairId>(i), std::move(text), "", Split::Test});
  }
  return out;
}

nlohmann::json hit_json(const RetrievalHit& h) {
  nlohmann::json j{{"pair_id", h.pair_id}, {"sim", h.sim}};
  j["jac"] = h.jac ? nlohmann::json(*h.jac) : nlohmann::json(nullptr);
  j["cos"] = h.cos ? nlohmann::json(*h.cos) : nlohmann::json(nullptr);
  j["retrieved_assertion"] = h.retrieved_assertion;
  return j;
}

CodeBleuWeights parse_weights(const std::vector<double>& w) {
  if (w.size() != 4) throw Error(ErrorCode::BadWeights, "--weights takes four numbers");
  CodeBleuWeights out{w[0], w[1], w[2], w[3]};
  out.validate();
  return out;
}

// ---- subcommands ---------------------------------------------------------

struct IngestArgs {
  std::string focal, asserts, jsonl, out, split = "test";
  std::optional<std::uint64_t> split_seed;
};

int cmd_ingest(const IngestArgs& a) {
  const auto split = parse_split(a.split);
  if (!split) throw Error(ErrorCode::Config, "unknown split '" + a.split + "'");
  Corpus corpus;
  if (!a.jsonl.empty()) {
    if (!a.focal.empty() || !a.asserts.empty())
      throw Error(ErrorCode::Config, "--jsonl cannot be combined with --focal/--asserts");
    corpus = load_jsonl(a.jsonl);
  } else {
    if (a.focal.empty() || a.asserts.empty())
      throw Error(ErrorCode::Config, "need --focal and --asserts, or --jsonl");
    corpus = load_line_aligned(a.focal, a.asserts, *split);
  }
  if (!a.split_seed) {
    save_jsonl(corpus, a.out);
    std::cerr << "wrote " << corpus.size() << " pairs to " << a.out << "\n";
    return 0;
  }
  const auto parts = split_8_1_1(corpus, *a.split_seed);
  const fs::path out(a.out);
  const auto stem = (out.parent_path() / out.stem()).string();
  const std::pair<const Corpus*, Split> outs[] = {
      {&parts.train, Split::Train}, {&parts.valid, Split::Valid}, {&parts.test, Split::Test}};
  for (const auto& [c, s] : outs) {
    const auto path = stem + "." + std::string(to_string(s)) + ".jsonl";
    save_jsonl(*c, path);
    std::cerr << "wrote " << c->size() << " pairs to " << path << "\n";
  }
  return 0;
}

struct IndexArgs {
  std::string corpus, embedder = "hashing", endpoint, out;
  std::size_t dim = HashingEmbedder::kDefaultDim;
  std::uint64_t seed = HashingEmbedder::kDefaultSeed;
};

int cmd_index(const IndexArgs& a) {
  const auto corpus = load_jsonl(a.corpus);
  EmbedderSpec spec{a.embedder, a.dim, a.seed, a.endpoint};
  const auto provider = spec.make();
  const auto dense = build_dense_index(corpus, *provider);
  spec.dim = dense.dim();
  save_index_dir(a.out, corpus, dense, spec);
  std::cerr << "indexed " << corpus.size() << " pairs with " << provider->name() << " into " << a.out << "\n";
  return 0;
}

struct RetrievalArgs {
  std::string mode = "hybrid";
  double lambda = 1.0;
  bool exclude_duplicates = false;

  [[nodiscard]] HybridConfig config() const {
    HybridConfig c;
    c.mode = mode_from(mode);
    c.lambda = lambda;
    c.exclude_exact_duplicates = exclude_duplicates;
    c.validate();
    return c;
  }
};

struct RetrieveArgs {
  std::string corpus, index, query_file, out;
  RetrievalArgs r;
  std::size_t top_k = 1;
};

int cmd_retrieve(const RetrieveArgs& a) {
  const auto cfg = a.r.config();
  const auto ctx = open_index(a.index, cfg.mode, a.corpus);
  std::string out;
  for (const auto& q : load_queries(a.query_file)) {
    nlohmann::json hits = nlohmann::json::array();
    if (cfg.mode != RetrievalMode::None)
      for (const auto& h : ctx->retriever->retrieve_for(q, CorpusRole::Eval, cfg, a.top_k)) hits.push_back(hit_json(h));
    out += nlohmann::json{{"query_id", q.id}, {"hits", hits}}.dump() + "\n";
  }
  write_output(a.out, out);
  return 0;
}

struct ExportArgs {
  std::string corpus, index, out, separator{kDefaultSeparator};
  std::size_t budget = kDefaultInputBudget;
  RetrievalArgs r;
};

int cmd_export(const ExportArgs& a) {
  const auto cfg = a.r.config();
  const auto ctx = open_index(a.index, cfg.mode, a.corpus);
  const auto n = export_training_set(ctx->codebase, *ctx->retriever, cfg, a.separator, a.budget, a.out);
  std::cerr << "wrote " << n << " training records to " << a.out << "\n";
  return 0;
}

struct GenerateArgs {
  std::string eval, index, backend = "echo", endpoint, out, separator{kDefaultSeparator};
  std::size_t num_candidates = 1, max_out = kDefaultOutputBudget, budget = kDefaultInputBudget;
  RetrievalArgs r;
};

int cmd_generate(const GenerateArgs& a) {
  const auto cfg = a.r.config();
  const auto backend = make_backend(a.backend, a.endpoint);
  if (backend->requires_retrieval() && cfg.mode == RetrievalMode::None)
    throw Error(ErrorCode::Config, "backend '" + backend->name() + "' needs retrieval; mode none is not allowed");
  const auto ctx = open_index(a.index, cfg.mode, std::nullopt);
  const auto eval = load_jsonl(a.eval);

  std::vector<AugmentedInput> inputs;
  inputs.reserve(eval.size());
  for (const auto& q : eval.pairs) {
    std::optional<RetrievalHit> hit;
    if (cfg.mode != RetrievalMode::None) {
      auto hits = ctx->retriever->retrieve_for(q, CorpusRole::Eval, cfg, 1);
      if (!hits.empty()) hit = std::move(hits.front());
    }
    inputs.push_back(augment(q.focal_test, hit, a.separator, a.budget, q.id));
  }
  const auto lists = backend->generate_batch(inputs, a.num_candidates, a.max_out);
  if (lists.size() != inputs.size())
    throw Error(ErrorCode::Protocol, "backend returned " + std::to_string(lists.size()) + " candidate lists for " +
                                         std::to_string(inputs.size()) + " inputs");
  std::string out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : lists[i]) cands.push_back({{"text", c.text}, {"score", c.score}, {"rank", c.rank}});
    nlohmann::json j{{"query_id", inputs[i].query_id}, {"input", inputs[i].text}, {"candidates", cands}};
    j["retrieved_id"] = inputs[i].retrieved_id ? nlohmann::json(*inputs[i].retrieved_id) : nlohmann::json(nullptr);
    out += j.dump() + "\n";
  }
  write_output(a.out, out);
  return 0;
}

struct EvaluateArgs {
  std::string eval, codebase, backend = "echo", endpoint, out, run_name, separator{kDefaultSeparator};
  std::string embedder = "hashing", embed_endpoint;
  std::size_t dim = HashingEmbedder::kDefaultDim;
  std::uint64_t seed = HashingEmbedder::kDefaultSeed;
  RetrievalArgs r;
  bool skip_errors = false, self_exclude = false;
  std::size_t budget = kDefaultInputBudget, num_candidates = 1, max_out = kDefaultOutputBudget, max_n = 4, jobs = 1;
  std::vector<double> weights;
};

int cmd_evaluate(const EvaluateArgs& a) {
  EvalConfig cfg;
  cfg.retrieval = a.r.config();
  cfg.self_exclude = a.self_exclude;
  cfg.separator = a.separator;
  cfg.input_budget = a.budget;
  cfg.num_candidates = a.num_candidates;
  cfg.max_output_tokens = a.max_out;
  cfg.skip_errors = a.skip_errors;
  cfg.parallelism = a.jobs;
  cfg.metric.max_n = a.max_n;
  if (!a.weights.empty()) cfg.metric.weights = parse_weights(a.weights);
  cfg.seed = a.seed;

  const auto backend = make_backend(a.backend, a.endpoint);
  if (backend->requires_retrieval() && cfg.retrieval.mode == RetrievalMode::None)
    throw Error(ErrorCode::Config, "backend '" + backend->name() + "' needs retrieval; mode none is not allowed");

  const auto eval = load_jsonl(a.eval);
  Retrieval ctx;
  ctx.codebase = load_jsonl(a.codebase);
  ctx.spec = EmbedderSpec{a.embedder, a.dim, a.seed, a.embed_endpoint};
  ctx.finish(cfg.retrieval.mode);
  cfg.embedder = ctx.provider ? ctx.provider->name() : "none";

  const auto name = a.run_name.empty() ? fs::path(a.out).stem().string() : a.run_name;
  const auto report = run_eval(eval, *ctx.retriever, *backend, cfg, name);
  report_emit(report, ReportFormat::Json, a.out);
  std::cerr << name << ": accuracy " << report.accuracy << " (" << report.exact_count() << "/" << report.records.size()
            << "), codebleu " << report.codebleu_mean << "\n";
  return 0;
}

int cmd_overlap(const std::vector<std::string>& paths, const std::string& out) {
  std::vector<EvalReport> reports;
  for (const auto& p : paths) reports.push_back(load_report(p));
  write_output(out, to_json(overlap(reports)).dump(2) + "\n");
  return 0;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& out) {
  const auto f = parse_report_format(format);
  if (!f) throw Error(ErrorCode::Config, "unknown format '" + format + "'");
  write_output(out, render(load_report(in), *f));
  return 0;
}

void add_retrieval_flags(CLI::App* sub, RetrievalArgs& r, bool required) {
  auto* m = sub->add_option("--mode", r.mode, "Retrieval mode")
                ->check(CLI::IsMember({"hybrid", "token", "embed", "none", "token_only", "embed_only"}));
  auto* l = sub->add_option("--lambda", r.lambda, "Weight of the cosine term")->check(CLI::NonNegativeNumber);
  if (required) {
    m->required();
    l->required();
  }
  sub->add_flag("--exclude-duplicates", r.exclude_duplicates,
                "Skip codebase entries identical to the query pair");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented assertion generation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("assert-rag 1.0 (tokenization ") + std::string(kTokenizationVersion) + ")");

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Load line-aligned or jsonl pairs into a corpus file");
  s_ingest->add_option("--focal", ingest.focal, "Focal-test file, one per line");
  s_ingest->add_option("--asserts", ingest.asserts, "Assertion file, one per line");
  s_ingest->add_option("--jsonl", ingest.jsonl, "Existing jsonl records to validate instead");
  s_ingest->add_option("--out", ingest.out, "Output corpus.jsonl")->required();
  s_ingest->add_option("--split", ingest.split, "Split tag for line-aligned input")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  s_ingest->add_option("--split-seed", ingest.split_seed, "Write seeded 80/10/10 <stem>.{train,valid,test}.jsonl");

  IndexArgs index;
  auto* s_index = app.add_subcommand("index", "Embed a corpus and write an index directory");
  s_index->add_option("--corpus", index.corpus, "corpus.jsonl")->required();
  s_index->add_option("--embedder", index.embedder, "Embedding provider")
      ->required()
      ->check(CLI::IsMember({"hashing", "remote"}));
  s_index->add_option("--dim", index.dim, "Hashing embedder dimension");
  s_index->add_option("--seed", index.seed, "Hashing embedder seed");
  s_index->add_option("--endpoint", index.endpoint, "Model service URL for --embedder remote");
  s_index->add_option("--out", index.out, "Output directory")->required();

  RetrieveArgs retrieve;
  auto* s_retrieve = app.add_subcommand("retrieve", "Top-k retrieval for each query");
  s_retrieve->add_option("--corpus", retrieve.corpus, "Codebase corpus.jsonl the index was built from")->required();
  s_retrieve->add_option("--index", retrieve.index, "Index directory")->required();
  s_retrieve->add_option("--query-file", retrieve.query_file, "Queries: .jsonl records or one focal test per line")
      ->required();
  add_retrieval_flags(s_retrieve, retrieve.r, true);
  s_retrieve->add_option("--top-k", retrieve.top_k, "Hits per query")->required()->check(CLI::PositiveNumber);
  s_retrieve->add_option("--out", retrieve.out, "Output jsonl (default stdout)");

  ExportArgs exp;
  auto* s_export = app.add_subcommand("export-train", "Write retrieval-augmented training records");
  s_export->add_option("--corpus", exp.corpus, "Train corpus.jsonl the index was built from")->required();
  s_export->add_option("--index", exp.index, "Index directory")->required();
  s_export->add_option("--separator", exp.separator, "Separator token")->required();
  s_export->add_option("--budget", exp.budget, "Input token budget")->required();
  s_export->add_option("--out", exp.out, "Output jsonl")->required();
  add_retrieval_flags(s_export, exp.r, false);

  GenerateArgs gen;
  auto* s_gen = app.add_subcommand("generate", "Generate candidate assertions for an eval corpus");
  s_gen->add_option("--eval", gen.eval, "Eval corpus.jsonl")->required();
  s_gen->add_option("--index", gen.index, "Codebase index directory")->required();
  s_gen->add_option("--backend", gen.backend, "Generator backend")
      ->required()
      ->check(CLI::IsMember({"echo", "remote"}));
  s_gen->add_option("--endpoint", gen.endpoint, "Model service URL for --backend remote");
  s_gen->add_option("--num-candidates", gen.num_candidates, "Candidates per query")
      ->required()
      ->check(CLI::PositiveNumber);
  s_gen->add_option("--max-out", gen.max_out, "Output token limit")->required()->check(CLI::PositiveNumber);
  s_gen->add_option("--separator", gen.separator, "Separator token");
  s_gen->add_option("--budget", gen.budget, "Input token budget");
  s_gen->add_option("--out", gen.out, "Output jsonl (default stdout)");
  add_retrieval_flags(s_gen, gen.r, false);

  EvaluateArgs ev;
  auto* s_eval = app.add_subcommand("evaluate", "Run the full pipeline and write a json report");
  s_eval->add_option("--eval", ev.eval, "Eval corpus.jsonl")->required();
  s_eval->add_option("--codebase", ev.codebase, "Codebase corpus.jsonl")->required();
  add_retrieval_flags(s_eval, ev.r, true);
  s_eval->add_option("--backend", ev.backend, "Generator backend")
      ->required()
      ->check(CLI::IsMember({"echo", "remote"}));
  s_eval->add_option("--out", ev.out, "Output report.json")->required();
  s_eval->add_flag("--skip-errors", ev.skip_errors, "Record failing queries as incorrect instead of aborting");
  s_eval->add_flag("--self-exclude", ev.self_exclude, "Drop each query's own id from its retrieval candidates");
  s_eval->add_option("--endpoint", ev.endpoint, "Model service URL for --backend remote");
  s_eval->add_option("--embedder", ev.embedder, "Embedding provider")->check(CLI::IsMember({"hashing", "remote"}));
  s_eval->add_option("--embed-endpoint", ev.embed_endpoint, "Model service URL for --embedder remote");
  s_eval->add_option("--dim", ev.dim, "Hashing embedder dimension");
  s_eval->add_option("--seed", ev.seed, "Hashing embedder seed");
  s_eval->add_option("--separator", ev.separator, "Separator token");
  s_eval->add_option("--budget", ev.budget, "Input token budget");
  s_eval->add_option("--num-candidates", ev.num_candidates, "Candidates per query")->check(CLI::PositiveNumber);
  s_eval->add_option("--max-out", ev.max_out, "Output token limit")->check(CLI::PositiveNumber);
  s_eval->add_option("--weights", ev.weights, "CodeBLEU weights: ngram weighted syntax dataflow")->expected(4);
  s_eval->add_option("--max-n", ev.max_n, "Largest BLEU n-gram")->check(CLI::PositiveNumber);
  s_eval->add_option("--run-name", ev.run_name, "Run name (default: report file stem)");
  s_eval->add_option("--jobs", ev.jobs, "Concurrent queries")->check(CLI::PositiveNumber);

  std::vector<std::string> overlap_in;
  std::string overlap_out;
  auto* s_overlap = app.add_subcommand("overlap", "Venn counts of exactly-correct queries across runs");
  s_overlap->add_option("--reports", overlap_in, "Report json files")->required()->expected(1, 16);
  s_overlap->add_option("--out", overlap_out, "Output overlap.json")->required();

  std::string report_in, report_format = "table", report_out;
  auto* s_report = app.add_subcommand("report", "Render a report as json, csv or a text table");
  s_report->add_option("--in", report_in, "Report json")->required();
  s_report->add_option("--format", report_format, "Output format")
      ->required()
      ->check(CLI::IsMember({"json", "csv", "table"}));
  s_report->add_option("--out", report_out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s_ingest) return cmd_ingest(ingest);
    if (*s_index) return cmd_index(index);
    if (*s_retrieve) return cmd_retrieve(retrieve);
    if (*s_export) return cmd_export(exp);
    if (*s_gen) return cmd_generate(gen);
    if (*s_eval) return cmd_evaluate(ev);
    if (*s_overlap) return cmd_overlap(overlap_in, overlap_out);
    if (*s_report) return cmd_report(report_in, report_format, report_out);
  } catch (const Error& e) {
    std::cerr << "assert-rag: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

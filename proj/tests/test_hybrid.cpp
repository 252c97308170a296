#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "assert_rag/hybrid_retriever.hpp"
#include "support/synthetic.hpp"

using namespace assert_rag;

namespace {

struct Fixture {
  Corpus codebase;
  HashingEmbedder embedder{256, 0};
  SparseIndex sparse;
  DenseIndex dense;
  HybridRetriever retriever;

  explicit Fixture(Corpus c)
      : codebase(std::move(c)),
        sparse(build_sparse_index(codebase)),
        dense(build_dense_index(codebase, embedder)),
        retriever(codebase, sparse, &dense, &embedder) {}
};

std::vector<PairId> ids_of(const std::vector<RetrievalHit>& hits) {
  std::vector<PairId> out;
  for (const auto& h : hits) out.push_back(h.pair_id);
  return out;
}

}  // namespace

TEST_CASE("hybrid score examples", "[hybrid]") {
  CHECK(hybrid_score(1.0, 1.0, 1.0) == 2.0);
  CHECK(std::abs(hybrid_score(0.5, 0.7, 1.0) - 1.2) < 1e-15);
  CHECK(hybrid_score(0.4, 0.9, 0.0) == 0.4);
}

TEST_CASE("identical query retrieves its own entry", "[hybrid]") {
  Fixture f(testing::synthetic_corpus({.size = 20, .seed = 6}));
  const auto& target = f.codebase.pairs[7];
  const auto hits = f.retriever.retrieve(target.focal_test, HybridConfig{}, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].pair_id == 7);
  CHECK(*hits[0].jac == 1.0);
  CHECK(std::abs(hits[0].sim - 2.0) < 1e-6);
  CHECK(hits[0].retrieved_assertion == target.assertion);
}

TEST_CASE("single entry codebase always wins", "[hybrid]") {
  Corpus c;
  c.pairs = {{5, "int size ( )", "assertEquals ( 0 , s . size ( ) )", Split::Train}};
  Fixture f(std::move(c));
  const auto hits = f.retriever.retrieve("completely different words here", HybridConfig{}, 3);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].pair_id == 5);
}

TEST_CASE("ties break toward the lower pair id", "[hybrid]") {
  Corpus c;
  c.pairs = {{9, "void run ( )", "assertTrue ( a )", Split::Train},
             {3, "void run ( )", "assertFalse ( b )", Split::Train},
             {4, "int other ( )", "assertNull ( c )", Split::Train}};
  Fixture f(std::move(c));
  for (const auto mode : {RetrievalMode::Hybrid, RetrievalMode::TokenOnly, RetrievalMode::EmbedOnly}) {
    HybridConfig cfg;
    cfg.mode = mode;
    const auto hits = f.retriever.retrieve("void run ( )", cfg, 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].pair_id == 3);
    CHECK(hits[1].pair_id == 9);
  }
}

TEST_CASE("mode none retrieves nothing; full exclusion is an error", "[hybrid]") {
  Fixture f(testing::synthetic_corpus({.size = 5, .seed = 1}));
  HybridConfig none;
  none.mode = RetrievalMode::None;
  CHECK(f.retriever.retrieve("anything", none, 1).empty());

  HybridConfig all;
  for (const auto& p : f.codebase.pairs) all.exclude_ids.insert(p.id);
  try {
    (void)f.retriever.retrieve("anything", all, 1);
    FAIL("expected EmptyCodebase");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCodebase);
  }
}

TEST_CASE("leakage guard", "[hybrid]") {
  auto c = testing::synthetic_corpus({.size = 120, .seed = 8});
  c.pairs[99].focal_test = c.pairs[12].focal_test + " extra";
  Fixture f(c);
  HybridConfig cfg;

  const auto train_ex = f.retriever.leakage_guard(f.codebase.pairs[12], CorpusRole::Train, cfg);
  CHECK(train_ex.contains(12));

  const TestAssertPair fresh{1000, "brand new focal test", "assertTrue ( z )", Split::Test};
  CHECK(f.retriever.leakage_guard(fresh, CorpusRole::Eval, cfg).empty());
  cfg.exclude_exact_duplicates = true;
  CHECK(f.retriever.leakage_guard(fresh, CorpusRole::Eval, cfg).empty());

  const TestAssertPair leaked{5000, f.codebase.pairs[99].focal_test, f.codebase.pairs[99].assertion, Split::Test};
  const auto ex = f.retriever.leakage_guard(leaked, CorpusRole::Eval, cfg);
  CHECK(ex == std::unordered_set<PairId>{99});
  const auto hits = f.retriever.retrieve_for(leaked, CorpusRole::Eval, cfg, 3);
  for (const auto& h : hits) CHECK(h.pair_id != 99);

  // Same focal-test but a different assertion is not a duplicate.
  const TestAssertPair near{5001, f.codebase.pairs[99].focal_test, "assertNull ( q )", Split::Test};
  CHECK(f.retriever.leakage_guard(near, CorpusRole::Eval, cfg).empty());

  // Self-exclusion during training-time retrieval.
  const auto self_hits = f.retriever.retrieve_for(f.codebase.pairs[12], CorpusRole::Train, HybridConfig{}, 5);
  for (const auto& h : self_hits) CHECK(h.pair_id != 12);
}

TEST_CASE("retrieval invariants over random queries", "[hybrid][property]") {
  Fixture f(testing::synthetic_corpus({.size = 300, .seed = 14, .near_duplicate_rate = 0.2}));
  const auto queries = testing::synthetic_corpus({.size = 40, .seed = 15});
  for (const auto& q : queries.pairs) {
    HybridConfig hybrid;
    hybrid.lambda = 0.0;
    HybridConfig token;
    token.mode = RetrievalMode::TokenOnly;
    const auto h0 = f.retriever.retrieve(q.focal_test, hybrid, 20);
    const auto t0 = f.retriever.retrieve(q.focal_test, token, 20);
    CHECK(ids_of(h0) == ids_of(t0));

    HybridConfig lam;
    lam.lambda = 1.7;
    const auto a = f.retriever.retrieve(q.focal_test, lam, 10);
    const auto b = f.retriever.retrieve(q.focal_test, lam, 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].pair_id == b[i].pair_id);
      CHECK(a[i].sim == b[i].sim);
      CHECK(std::abs(a[i].sim - (*a[i].jac + lam.lambda * *a[i].cos)) <= 1e-12);
      if (i > 0) CHECK(a[i - 1].sim >= a[i].sim);
    }

    // Raising lambda changes only the combination, not the components.
    HybridConfig big;
    big.lambda = 10.0;
    const auto all_small = f.retriever.retrieve(q.focal_test, lam, f.codebase.size());
    const auto all_big = f.retriever.retrieve(q.focal_test, big, f.codebase.size());
    std::map<PairId, std::pair<double, double>> comps;
    for (const auto& h : all_small) comps[h.pair_id] = {*h.jac, *h.cos};
    for (const auto& h : all_big) {
      CHECK(comps.at(h.pair_id).first == *h.jac);
      CHECK(comps.at(h.pair_id).second == *h.cos);
    }
  }
}

TEST_CASE("retriever validates configuration", "[hybrid]") {
  const auto c = testing::synthetic_corpus({.size = 10, .seed = 2});
  const auto sparse = build_sparse_index(c);
  const HybridRetriever sparse_only(c, sparse);
  HybridConfig cfg;
  CHECK_THROWS_AS(sparse_only.retrieve("x", cfg, 1), Error);
  cfg.mode = RetrievalMode::TokenOnly;
  const auto hits = sparse_only.retrieve(c.pairs[0].focal_test, cfg, 1);
  REQUIRE(hits.size() == 1);
  CHECK_FALSE(hits[0].cos.has_value());

  HybridConfig neg;
  neg.lambda = -1.0;
  CHECK_THROWS_AS(sparse_only.retrieve("x", neg, 1), Error);
  CHECK_THROWS_AS(sparse_only.retrieve("x", cfg, 0), Error);

  const auto other = testing::synthetic_corpus({.size = 11, .seed = 2});
  CHECK_THROWS_AS(HybridRetriever(other, sparse), Error);
}

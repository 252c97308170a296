#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "assert_rag/sparse_retriever.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace assert_rag;

namespace {

std::set<std::string> as_set(const TokenSet& t) { return {t.tokens().begin(), t.tokens().end()}; }

TokenSet random_set(std::mt19937_64& rng, std::size_t universe, std::size_t max_size) {
  std::vector<std::string> toks;
  const auto n = rng() % (max_size + 1);
  for (std::size_t i = 0; i < n; ++i) toks.push_back("t" + std::to_string(rng() % universe));
  return TokenSet(toks);
}

}  // namespace

TEST_CASE("lex_tokenize splits words and punctuation and dedups", "[sparse]") {
  CHECK(as_set(lex_tokenize("assertEquals ( a , a )")) ==
        std::set<std::string>{"assertEquals", "(", "a", ",", ")"});
  CHECK(lex_tokenize("").empty());
  CHECK(as_set(lex_tokenize("foo.bar(x)")) == std::set<std::string>{"foo", ".", "bar", "(", "x", ")"});
  CHECK(lex_tokens("foo.bar(x)") == std::vector<std::string>{"foo", ".", "bar", "(", "x", ")"});
  // No camelCase splitting; case preserved; underscores are word characters.
  CHECK(as_set(lex_tokenize("getValue get_value GetValue")) ==
        std::set<std::string>{"getValue", "get_value", "GetValue"});
  CHECK(lex_tokens("a==b") == std::vector<std::string>{"a", "=", "=", "b"});
}

TEST_CASE("lex_tokenize is idempotent on its joined output", "[sparse][property]") {
  const auto c = testing::synthetic_corpus({.size = 200, .seed = 5});
  for (const auto& p : c.pairs) {
    const auto once = lex_tokens(p.focal_test);
    CHECK(lex_tokens(join(once)) == once);
  }
  CHECK(lex_tokens(join(lex_tokens("x.y(z)+=\"s\""))) == lex_tokens("x.y(z)+=\"s\""));
}

TEST_CASE("jaccard examples", "[sparse]") {
  const TokenSet abc({"a", "b", "c"});
  const TokenSet bcd({"b", "c", "d"});
  CHECK(jaccard(abc, abc) == 1.0);
  CHECK(jaccard(abc, TokenSet({"x", "y"})) == 0.0);
  CHECK(jaccard(abc, bcd) == 0.5);
  CHECK(jaccard(TokenSet(), abc) == 0.0);
  try {
    (void)jaccard(TokenSet(), TokenSet());
    FAIL("expected BothEmpty");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BothEmpty);
  }
}

TEST_CASE("jaccard properties on random sets", "[sparse][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_set(rng, 30, 12);
    const auto b = random_set(rng, 30, 12);
    if (a.empty() && b.empty()) continue;
    const double j = jaccard(a, b);
    CHECK(j == jaccard(b, a));
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
    CHECK((j == 1.0) == (a == b));
    CHECK(j == testing::brute_force_jaccard(as_set(a), as_set(b)));

    std::vector<std::string> u = a.tokens();
    u.insert(u.end(), b.tokens().begin(), b.tokens().end());
    const TokenSet a_union_b(u);
    if (!a.empty()) CHECK(jaccard(a, a_union_b) >= j);
  }
}

TEST_CASE("sparse index covers the corpus in order", "[sparse]") {
  Corpus c;
  c.pairs = {{0, "void f ( ) { a . b ( ) ; }", "assertTrue ( x )", Split::Train},
             {1, "( ) ; { } .", "assertNull ( y )", Split::Train},
             {2, "int g ( int k )", "assertEquals ( 1 , k )", Split::Train}};
  const auto idx = build_sparse_index(c);
  REQUIRE(idx.size() == 3);
  CHECK(idx.entries()[0].id == 0);
  CHECK(idx.entries()[2].id == 2);
  CHECK(as_set(idx.entries()[1].tokens) == std::set<std::string>{"(", ")", ";", "{", "}", "."});

  const auto again = build_sparse_index(c);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again.entries()[i].tokens == idx.entries()[i].tokens);

  try {
    (void)build_sparse_index(Corpus{});
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCorpus);
  }
}

TEST_CASE("interned scoring agrees with set jaccard", "[sparse][property]") {
  const auto c = testing::synthetic_corpus({.size = 150, .seed = 11, .near_duplicate_rate = 0.3});
  const auto idx = build_sparse_index(c);
  const auto queries = testing::synthetic_corpus({.size = 20, .seed = 12});
  for (const auto& q : queries.pairs) {
    const auto qs = lex_tokenize(q.focal_test + " unseenToken");
    const auto interned = idx.intern(qs);
    for (std::size_t pos = 0; pos < idx.size(); ++pos)
      REQUIRE(idx.score(interned, pos) == jaccard(qs, idx.entries()[pos].tokens));
  }
}

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "assert_rag/error.hpp"
#include "assert_rag/tokenize.hpp"

namespace assert_rag {

using PairId = std::int64_t;

enum class Split { Train, Valid, Test };

inline std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "test";
}

inline std::optional<Split> parse_split(std::string_view s) noexcept {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

// Column order of the per-type statistics table.
enum class AssertType { Equals, True, That, NotNull, False, Null, ArrayEquals, Same, Other };

inline constexpr std::array<AssertType, 9> kAllAssertTypes = {
    AssertType::Equals, AssertType::True,        AssertType::That,
    AssertType::NotNull, AssertType::False,      AssertType::Null,
    AssertType::ArrayEquals, AssertType::Same,   AssertType::Other};

inline std::string_view to_string(AssertType t) noexcept {
  switch (t) {
    case AssertType::Equals: return "Equals";
    case AssertType::True: return "True";
    case AssertType::That: return "That";
    case AssertType::NotNull: return "NotNull";
    case AssertType::False: return "False";
    case AssertType::Null: return "Null";
    case AssertType::ArrayEquals: return "ArrayEquals";
    case AssertType::Same: return "Same";
    case AssertType::Other: return "Other";
  }
  return "Other";
}

inline std::optional<AssertType> parse_assert_type(std::string_view s) noexcept {
  for (const auto t : kAllAssertTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

/// Category of the first JUnit assertion method named in `assertion`, scanning
/// tokens left to right. Qualified calls (`Assert . assertEquals`) match on
/// the final identifier since `.` is its own token.
inline AssertType classify_assertion(std::string_view assertion) {
  static constexpr std::array<std::pair<std::string_view, AssertType>, 8> kMethods = {{
      {"assertEquals", AssertType::Equals},
      {"assertTrue", AssertType::True},
      {"assertThat", AssertType::That},
      {"assertNotNull", AssertType::NotNull},
      {"assertFalse", AssertType::False},
      {"assertNull", AssertType::Null},
      {"assertArrayEquals", AssertType::ArrayEquals},
      {"assertSame", AssertType::Same},
  }};
  for (const auto& tok : lex_tokens(assertion))
    for (const auto& [name, type] : kMethods)
      if (tok == name) return type;
  return AssertType::Other;
}

struct TestAssertPair {
  PairId id = 0;
  std::string focal_test;
  std::string assertion;
  Split split = Split::Test;

  [[nodiscard]] AssertType assert_type() const { return classify_assertion(assertion); }

  friend bool operator==(const TestAssertPair&, const TestAssertPair&) = default;
};

/// Immutable after load. Pair order is file order.
struct Corpus {
  std::string name;
  std::vector<TestAssertPair> pairs;

  [[nodiscard]] std::size_t size() const noexcept { return pairs.size(); }
  [[nodiscard]] bool empty() const noexcept { return pairs.empty(); }
};

namespace detail {

inline bool valid_utf8(std::string_view s) noexcept {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Reject overlong encodings, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
      return false;
    i += len;
  }
  return true;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "read failed for " + path.string());
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open for writing " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

/// Lines without their terminators; a final newline does not start a new line.
inline std::vector<std::string> split_lines(std::string_view content) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string> read_text_lines(const std::filesystem::path& path) {
  auto content = read_file(path);
  if (!valid_utf8(content)) throw Error(ErrorCode::Io, path.string() + " is not valid UTF-8");
  return split_lines(content);
}

}  // namespace detail

inline Corpus load_line_aligned(const std::filesystem::path& focal_test_path,
                                const std::filesystem::path& assertion_path, Split split) {
  const auto focal = detail::read_text_lines(focal_test_path);
  const auto asserts = detail::read_text_lines(assertion_path);
  if (focal.size() != asserts.size()) {
    throw Error(ErrorCode::LineCountMismatch,
                focal_test_path.string() + " has " + std::to_string(focal.size()) + " lines, " +
                    assertion_path.string() + " has " + std::to_string(asserts.size()));
  }
  Corpus corpus;
  corpus.name = focal_test_path.stem().string();
  corpus.pairs.reserve(focal.size());
  for (std::size_t i = 0; i < focal.size(); ++i) {
    TestAssertPair p;
    p.id = static_cast<PairId>(i);
    p.focal_test = normalize_whitespace(focal[i]);
    p.assertion = normalize_whitespace(asserts[i]);
    p.split = split;
    if (p.focal_test.empty() || p.assertion.empty()) {
      throw Error(ErrorCode::EmptySample,
                  "blank " + std::string(p.focal_test.empty() ? "focal-test" : "assertion") +
                      " at line " + std::to_string(i + 1));
    }
    corpus.pairs.push_back(std::move(p));
  }
  return corpus;
}

inline nlohmann::json to_json(const TestAssertPair& p) {
  return nlohmann::json{{"id", p.id},
                        {"focal_test", p.focal_test},
                        {"assertion", p.assertion},
                        {"split", std::string(to_string(p.split))}};
}

/// Parses one record line. `line_no` is 1-based and only used for messages.
inline TestAssertPair parse_record(std::string_view line, std::size_t line_no) {
  const auto where = "line " + std::to_string(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, where + ": not a JSON object");
  const auto id = j.find("id");
  const auto ft = j.find("focal_test");
  const auto as = j.find("assertion");
  if (id == j.end() || !id->is_number_integer())
    throw Error(ErrorCode::MalformedRecord, where + ": missing integer field 'id'");
  if (ft == j.end() || !ft->is_string())
    throw Error(ErrorCode::MalformedRecord, where + ": missing string field 'focal_test'");
  if (as == j.end() || !as->is_string())
    throw Error(ErrorCode::MalformedRecord, where + ": missing string field 'assertion'");

  TestAssertPair p;
  p.id = id->get<PairId>();
  p.focal_test = normalize_whitespace(ft->get<std::string>());
  p.assertion = normalize_whitespace(as->get<std::string>());
  if (const auto sp = j.find("split"); sp != j.end() && !sp->is_null()) {
    const auto parsed = sp->is_string() ? parse_split(sp->get<std::string>()) : std::nullopt;
    if (!parsed) throw Error(ErrorCode::MalformedRecord, where + ": bad split value");
    p.split = *parsed;
  }
  if (p.focal_test.empty() || p.assertion.empty())
    throw Error(ErrorCode::EmptySample, where + ": blank focal_test or assertion");
  return p;
}

/// One JSON object per line. Blank lines are skipped; missing split means test.
inline Corpus load_jsonl(const std::filesystem::path& path) {
  const auto lines = detail::read_text_lines(path);
  Corpus corpus;
  corpus.name = path.stem().string();
  std::unordered_set<PairId> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (normalize_whitespace(lines[i]).empty()) continue;
    auto p = parse_record(lines[i], i + 1);
    if (!seen.insert(p.id).second)
      throw Error(ErrorCode::DuplicateId,
                  "id " + std::to_string(p.id) + " repeated at line " + std::to_string(i + 1));
    corpus.pairs.push_back(std::move(p));
  }
  return corpus;
}

inline std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& p : corpus.pairs) {
    out += to_json(p).dump();
    out += '\n';
  }
  return out;
}

inline void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  detail::write_file(path, to_jsonl(corpus));
}

struct CorpusSplits {
  Corpus train;
  Corpus valid;
  Corpus test;
};

/// Seeded Fisher-Yates shuffle, then 80/10/10 by count with the remainder
/// going to train. The RNG draw is spelled out rather than delegated to
/// std::shuffle so partitions are identical across standard libraries.
inline CorpusSplits split_8_1_1(const Corpus& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 10) throw Error(ErrorCode::TooSmall, "need at least 10 pairs, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }

  const std::size_t n_valid = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_valid - n_test;

  CorpusSplits out;
  out.train.name = corpus.name + ".train";
  out.valid.name = corpus.name + ".valid";
  out.test.name = corpus.name + ".test";
  for (std::size_t k = 0; k < n; ++k) {
    TestAssertPair p = corpus.pairs[order[k]];
    if (k < n_train) {
      p.split = Split::Train;
      out.train.pairs.push_back(std::move(p));
    } else if (k < n_train + n_valid) {
      p.split = Split::Valid;
      out.valid.pairs.push_back(std::move(p));
    } else {
      p.split = Split::Test;
      out.test.pairs.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace assert_rag

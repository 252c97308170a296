#pragma once

// A small recursive-descent parser for single Java assertion statements, over
// lexical tokens. It covers qualified calls, nested calls, field access,
// literals, parenthesized expressions and the binary operators + - * / == !=.
// Anything outside that subset becomes an Unparsed leaf, so parsing never
// fails and every input token ends up in exactly one leaf.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "assert_rag/tokenize.hpp"

namespace assert_rag {

enum class NodeKind {
  Statement,
  MethodCall,
  QualifiedName,
  Identifier,
  Literal,
  ArgumentList,
  BinaryOp,
  Group,
  Punct,
  Unparsed,
};

inline std::string_view to_string(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Statement: return "Statement";
    case NodeKind::MethodCall: return "MethodCall";
    case NodeKind::QualifiedName: return "QualifiedName";
    case NodeKind::Identifier: return "Identifier";
    case NodeKind::Literal: return "Literal";
    case NodeKind::ArgumentList: return "ArgumentList";
    case NodeKind::BinaryOp: return "BinaryOp";
    case NodeKind::Group: return "Group";
    case NodeKind::Punct: return "Punct";
    case NodeKind::Unparsed: return "Unparsed";
  }
  return "Unparsed";
}

struct AstNode {
  NodeKind kind = NodeKind::Unparsed;
  std::vector<std::string> tokens;  // leaves only
  std::vector<AstNode> children;    // source order
  bool is_callee = false;           // Identifier naming the invoked method

  [[nodiscard]] bool is_leaf() const noexcept { return children.empty() && kind != NodeKind::Statement; }
};

namespace detail {

inline bool is_word_token(std::string_view t) noexcept { return !t.empty() && is_word(t.front()); }
inline bool is_digit_start(std::string_view t) noexcept { return !t.empty() && t.front() >= '0' && t.front() <= '9'; }
inline bool is_literal_word(std::string_view t) noexcept { return t == "true" || t == "false" || t == "null"; }

class AssertionParser {
 public:
  explicit AssertionParser(const std::vector<std::string>& toks) : toks_(toks) {}

  struct Fail {};

  /// Whole-statement parse; throws Fail if any token is left over.
  AstNode statement() {
    AstNode root{NodeKind::Statement, {}, {}};
    if (!at_end() && !peek_is(";")) root.children.push_back(expr());
    if (peek_is(";")) root.children.push_back(punct());
    if (!at_end()) throw Fail{};
    return root;
  }

  AstNode expr() { return equality(); }

  [[nodiscard]] bool at_end() const noexcept { return pos_ >= toks_.size(); }

 private:
  [[nodiscard]] bool peek_is(std::string_view t, std::size_t ahead = 0) const noexcept {
    return pos_ + ahead < toks_.size() && toks_[pos_ + ahead] == t;
  }
  [[nodiscard]] const std::string* peek(std::size_t ahead = 0) const noexcept {
    return pos_ + ahead < toks_.size() ? &toks_[pos_ + ahead] : nullptr;
  }

  AstNode punct() { return AstNode{NodeKind::Punct, {toks_[pos_++]}, {}}; }

  AstNode binary(AstNode lhs, std::vector<std::string> op, AstNode rhs) {
    AstNode n{NodeKind::BinaryOp, {}, {}};
    n.children.push_back(std::move(lhs));
    n.children.push_back(AstNode{NodeKind::Punct, std::move(op), {}});
    n.children.push_back(std::move(rhs));
    return n;
  }

  AstNode equality() {
    auto lhs = additive();
    while ((peek_is("=") && peek_is("=", 1)) || (peek_is("!") && peek_is("=", 1))) {
      std::vector<std::string> op{toks_[pos_], toks_[pos_ + 1]};
      pos_ += 2;
      lhs = binary(std::move(lhs), std::move(op), additive());
    }
    return lhs;
  }

  AstNode additive() {
    auto lhs = multiplicative();
    while ((peek_is("+") || peek_is("-")) && !peek_is("=", 1)) {
      std::vector<std::string> op{toks_[pos_++]};
      lhs = binary(std::move(lhs), std::move(op), multiplicative());
    }
    return lhs;
  }

  AstNode multiplicative() {
    auto lhs = postfix();
    while ((peek_is("*") || peek_is("/")) && !peek_is("=", 1)) {
      std::vector<std::string> op{toks_[pos_++]};
      lhs = binary(std::move(lhs), std::move(op), postfix());
    }
    return lhs;
  }

  AstNode args() {
    AstNode list{NodeKind::ArgumentList, {}, {}};
    if (!peek_is("(")) throw Fail{};
    list.children.push_back(punct());
    if (peek_is(")")) {
      list.children.push_back(punct());
      return list;
    }
    for (;;) {
      list.children.push_back(expr());
      if (peek_is(",")) {
        list.children.push_back(punct());
        continue;
      }
      if (peek_is(")")) {
        list.children.push_back(punct());
        return list;
      }
      throw Fail{};
    }
  }

  AstNode identifier() {
    const auto* t = peek();
    if (t == nullptr || !is_word_token(*t) || is_digit_start(*t) || is_literal_word(*t)) throw Fail{};
    ++pos_;
    return AstNode{NodeKind::Identifier, {*t}, {}};
  }

  static AstNode call(AstNode callee, AstNode arglist) {
    if (callee.kind == NodeKind::Identifier) {
      callee.is_callee = true;
    } else if (callee.kind == NodeKind::QualifiedName && !callee.children.empty()) {
      callee.children.back().is_callee = true;
    }
    AstNode n{NodeKind::MethodCall, {}, {}};
    n.children.push_back(std::move(callee));
    n.children.push_back(std::move(arglist));
    return n;
  }

  AstNode postfix() {
    auto node = primary();
    while (peek_is(".")) {
      const auto* next = peek(1);
      if (next == nullptr || !is_word_token(*next) || is_digit_start(*next)) throw Fail{};
      if (node.kind == NodeKind::Identifier || (node.kind == NodeKind::QualifiedName && flat_name_)) {
        // Extend a dotted name a.b.c in place.
        if (node.kind == NodeKind::Identifier) {
          AstNode q{NodeKind::QualifiedName, {}, {}};
          q.children.push_back(std::move(node));
          node = std::move(q);
        }
        node.children.push_back(punct());
        node.children.push_back(identifier());
        flat_name_ = true;
      } else {
        AstNode q{NodeKind::QualifiedName, {}, {}};
        q.children.push_back(std::move(node));
        q.children.push_back(punct());
        q.children.push_back(identifier());
        node = std::move(q);
        flat_name_ = false;
      }
      if (peek_is("(")) {
        node = call(std::move(node), args());
        flat_name_ = false;
      }
    }
    flat_name_ = false;
    return node;
  }

  AstNode literal_quoted(const std::string& quote) {
    AstNode lit{NodeKind::Literal, {toks_[pos_++]}, {}};
    while (!at_end()) {
      const bool escaped = lit.tokens.back() == "\\" && lit.tokens.size() > 1;
      lit.tokens.push_back(toks_[pos_++]);
      if (lit.tokens.back() == quote && !escaped) return lit;
    }
    throw Fail{};
  }

  AstNode primary() {
    const auto* t = peek();
    if (t == nullptr) throw Fail{};
    if (*t == "\"" || *t == "'") return literal_quoted(*t);
    if (*t == "(") {
      AstNode g{NodeKind::Group, {}, {}};
      g.children.push_back(punct());
      g.children.push_back(expr());
      if (!peek_is(")")) throw Fail{};
      g.children.push_back(punct());
      return g;
    }
    if (*t == "-" && peek(1) != nullptr && is_digit_start(*peek(1))) {
      AstNode lit{NodeKind::Literal, {toks_[pos_], toks_[pos_ + 1]}, {}};
      pos_ += 2;
      extend_decimal(lit);
      return lit;
    }
    if (is_digit_start(*t)) {
      AstNode lit{NodeKind::Literal, {*t}, {}};
      ++pos_;
      extend_decimal(lit);
      return lit;
    }
    if (is_literal_word(*t)) {
      ++pos_;
      return AstNode{NodeKind::Literal, {*t}, {}};
    }
    auto id = identifier();
    flat_name_ = false;
    if (peek_is("(")) return call(std::move(id), args());
    return id;
  }

  // 1 . 5 and 2 . 0f are single numeric literals after lexing.
  void extend_decimal(AstNode& lit) {
    if (peek_is(".") && peek(1) != nullptr && is_digit_start(*peek(1))) {
      lit.tokens.push_back(toks_[pos_]);
      lit.tokens.push_back(toks_[pos_ + 1]);
      pos_ += 2;
    }
  }

  const std::vector<std::string>& toks_;
  std::size_t pos_ = 0;
  bool flat_name_ = false;
};

inline AstNode unparsed(std::vector<std::string> toks) { return AstNode{NodeKind::Unparsed, std::move(toks), {}}; }

inline std::optional<AstNode> try_parse_expr(const std::vector<std::string>& toks) {
  if (toks.empty()) return std::nullopt;
  AssertionParser p(toks);
  try {
    auto node = p.expr();
    if (!p.at_end()) return std::nullopt;
    return node;
  } catch (const AssertionParser::Fail&) {
    return std::nullopt;
  }
}

// Degraded parse: `callee ( arg , arg , ... ) [;]` where each argument that
// the grammar rejects becomes an Unparsed leaf.
inline std::optional<AstNode> parse_call_shell(const std::vector<std::string>& toks) {
  std::size_t end = toks.size();
  const bool semi = end > 0 && toks[end - 1] == ";";
  if (semi) --end;
  if (end < 3 || toks[end - 1] != ")") return std::nullopt;

  // Find the '(' matching the final ')'.
  std::size_t open = end - 1;
  int depth = 0;
  for (std::size_t i = end; i-- > 0;) {
    if (toks[i] == ")") ++depth;
    if (toks[i] == "(") --depth;
    if (depth == 0) {
      open = i;
      break;
    }
  }
  if (depth != 0 || open == 0) return std::nullopt;

  std::vector<std::string> callee_toks(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(open));
  auto callee = try_parse_expr(callee_toks);
  if (!callee || (callee->kind != NodeKind::Identifier && callee->kind != NodeKind::QualifiedName))
    return std::nullopt;
  if (callee->kind == NodeKind::Identifier)
    callee->is_callee = true;
  else
    callee->children.back().is_callee = true;

  AstNode list{NodeKind::ArgumentList, {}, {}};
  list.children.push_back(AstNode{NodeKind::Punct, {toks[open]}, {}});
  std::vector<std::string> arg;
  const auto flush = [&] {
    if (arg.empty()) return;
    if (auto node = try_parse_expr(arg))
      list.children.push_back(std::move(*node));
    else
      list.children.push_back(unparsed(arg));
    arg.clear();
  };
  depth = 0;
  for (std::size_t i = open + 1; i + 1 < end; ++i) {
    const auto& t = toks[i];
    if (t == "(" || t == "[" || t == "{") ++depth;
    if (t == ")" || t == "]" || t == "}") --depth;
    if (t == "," && depth == 0) {
      flush();
      list.children.push_back(AstNode{NodeKind::Punct, {t}, {}});
    } else {
      arg.push_back(t);
    }
  }
  flush();
  list.children.push_back(AstNode{NodeKind::Punct, {toks[end - 1]}, {}});

  AstNode call{NodeKind::MethodCall, {}, {}};
  call.children.push_back(std::move(*callee));
  call.children.push_back(std::move(list));
  AstNode root{NodeKind::Statement, {}, {}};
  root.children.push_back(std::move(call));
  if (semi) root.children.push_back(AstNode{NodeKind::Punct, {";"}, {}});
  return root;
}

inline void collect_leaf_tokens(const AstNode& n, std::vector<std::string>& out) {
  if (n.is_leaf()) {
    out.insert(out.end(), n.tokens.begin(), n.tokens.end());
    return;
  }
  for (const auto& c : n.children) collect_leaf_tokens(c, out);
}

}  // namespace detail

/// Parses one assertion statement. Total: unsupported input degrades to
/// Unparsed leaves instead of failing.
inline AstNode parse_assertion(std::string_view text) {
  const auto toks = lex_tokens(text);
  {
    detail::AssertionParser p(toks);
    try {
      return p.statement();
    } catch (const detail::AssertionParser::Fail&) {
    }
  }
  if (auto shell = detail::parse_call_shell(toks)) return std::move(*shell);
  AstNode root{NodeKind::Statement, {}, {}};
  if (!toks.empty()) root.children.push_back(detail::unparsed(toks));
  return root;
}

/// Concatenated leaf tokens in source order; equals lex_tokens of the input.
inline std::vector<std::string> leaf_tokens(const AstNode& root) {
  std::vector<std::string> out;
  detail::collect_leaf_tokens(root, out);
  return out;
}

/// Compact rendering used in tests and debugging, e.g.
/// MethodCall(assertEquals,[Literal(2),MethodCall(buff.position,[])]).
/// Statement wrappers with a single expression and punctuation are elided.
inline std::string to_sexpr(const AstNode& n) {
  const auto joined = [](const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) s += t;
    return s;
  };
  switch (n.kind) {
    case NodeKind::Statement: {
      std::string s;
      for (const auto& c : n.children) {
        if (c.kind == NodeKind::Punct) continue;
        if (!s.empty()) s += ";";
        s += to_sexpr(c);
      }
      return s;
    }
    case NodeKind::Identifier: return "Identifier(" + joined(n.tokens) + ")";
    case NodeKind::Literal: return "Literal(" + joined(n.tokens) + ")";
    case NodeKind::Punct: return joined(n.tokens);
    case NodeKind::Unparsed: return "Unparsed(" + join(n.tokens) + ")";
    case NodeKind::QualifiedName: {
      std::string s;
      for (const auto& c : n.children) s += c.kind == NodeKind::Identifier || c.kind == NodeKind::Punct
                                               ? joined(c.tokens)
                                               : to_sexpr(c);
      return s;
    }
    case NodeKind::MethodCall: {
      const auto& callee = n.children.at(0);
      std::string s = "MethodCall(";
      s += callee.kind == NodeKind::Identifier ? joined(callee.tokens) : to_sexpr(callee);
      s += ",";
      s += to_sexpr(n.children.at(1));
      return s + ")";
    }
    case NodeKind::ArgumentList: {
      std::string s = "[";
      bool first = true;
      for (const auto& c : n.children) {
        if (c.kind == NodeKind::Punct) continue;
        if (!first) s += ",";
        first = false;
        s += to_sexpr(c);
      }
      return s + "]";
    }
    case NodeKind::BinaryOp:
      return "BinaryOp(" + joined(n.children.at(1).tokens) + "," + to_sexpr(n.children.at(0)) + "," +
             to_sexpr(n.children.at(2)) + ")";
    case NodeKind::Group: return "Group(" + to_sexpr(n.children.at(1)) + ")";
  }
  return {};
}

}  // namespace assert_rag

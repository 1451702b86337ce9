#pragma once

// Token encoding of simply-typed lambda terms with de Bruijn indices.
//
// Grammar (LL(1), "$" is left-associative application):
//   term := atom { "$" atom }
//   atom := "CONST" name | "FREE" name | "VAR" name | "BOUND" nat
//         | "ABS" "(" term ")" | "(" term ")"
//
// Serialization emits the minimal-parenthesis form: an application argument is
// parenthesized only when it is itself an application; ABS always carries its
// body parentheses (they are part of the atom form, so an ABS argument needs
// no extra pair). Left spines `a $ b $ c` emit no parentheses.

#include <cctype>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "isarforge/errors.hpp"

namespace isarforge {

using TokenSeq = std::vector<std::string>;

enum class TermKind : std::uint8_t { Const, Free, Var, Bound, Abs, App };

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  std::string name;    // Const/Free/Var
  std::size_t index{};  // Bound
  TermPtr child;       // Abs body, or App fun
  TermPtr arg;         // App arg

  static TermPtr constant(std::string n) {
    return std::make_shared<Term>(Term{TermKind::Const, std::move(n), 0, nullptr, nullptr});
  }
  static TermPtr free(std::string n) {
    return std::make_shared<Term>(Term{TermKind::Free, std::move(n), 0, nullptr, nullptr});
  }
  static TermPtr var(std::string n) {
    return std::make_shared<Term>(Term{TermKind::Var, std::move(n), 0, nullptr, nullptr});
  }
  static TermPtr bound(std::size_t k) {
    return std::make_shared<Term>(Term{TermKind::Bound, {}, k, nullptr, nullptr});
  }
  static TermPtr abs(TermPtr body) {
    return std::make_shared<Term>(Term{TermKind::Abs, {}, 0, std::move(body), nullptr});
  }
  static TermPtr app(TermPtr fun, TermPtr argument) {
    return std::make_shared<Term>(
        Term{TermKind::App, {}, 0, std::move(fun), std::move(argument)});
  }
};

inline bool term_equal(const Term& a, const Term& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case TermKind::Const:
    case TermKind::Free:
    case TermKind::Var:
      return a.name == b.name;
    case TermKind::Bound:
      return a.index == b.index;
    case TermKind::Abs:
      return term_equal(*a.child, *b.child);
    case TermKind::App:
      return term_equal(*a.child, *b.child) && term_equal(*a.arg, *b.arg);
  }
  return false;
}

inline bool term_equal(const TermPtr& a, const TermPtr& b) { return term_equal(*a, *b); }

namespace detail {

inline bool is_keyword(const std::string& tok) {
  return tok == "CONST" || tok == "FREE" || tok == "VAR" || tok == "BOUND" ||
         tok == "ABS" || tok == "$" || tok == "(" || tok == ")";
}

inline bool is_nat(const std::string& tok) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

class TermParser {
 public:
  explicit TermParser(const TokenSeq& tokens) : toks_(tokens) {}

  TermPtr run() {
    if (toks_.empty()) throw EmptyInput();
    check_balance();
    TermPtr t = parse_term();
    if (pos_ != toks_.size()) throw SyntaxError(pos_, "end of input");
    return t;
  }

 private:
  void check_balance() const {
    long depth = 0;
    for (const auto& t : toks_) {
      if (t == "(") ++depth;
      if (t == ")") --depth;
      if (depth < 0) throw UnbalancedParens();
    }
    if (depth != 0) throw UnbalancedParens();
  }

  const std::string& peek() const {
    static const std::string kEnd;
    return pos_ < toks_.size() ? toks_[pos_] : kEnd;
  }
  bool at_end() const { return pos_ >= toks_.size(); }

  std::string expect_name(const char* what) {
    if (at_end()) throw SyntaxError(pos_, what);
    const std::string& t = toks_[pos_];
    if (is_keyword(t)) throw SyntaxError(pos_, std::string(what) + " (got keyword '" + t + "')");
    ++pos_;
    return t;
  }

  void expect(const char* literal) {
    if (at_end() || toks_[pos_] != literal) throw SyntaxError(pos_, std::string("'") + literal + "'");
    ++pos_;
  }

  TermPtr parse_term() {
    TermPtr t = parse_atom();
    while (!at_end() && peek() == "$") {
      ++pos_;
      t = Term::app(std::move(t), parse_atom());
    }
    return t;
  }

  TermPtr parse_atom() {
    if (at_end()) throw SyntaxError(pos_, "an atom");
    const std::string& t = toks_[pos_];
    if (t == "CONST") {
      ++pos_;
      return Term::constant(expect_name("a constant name"));
    }
    if (t == "FREE") {
      ++pos_;
      return Term::free(expect_name("a free-variable name"));
    }
    if (t == "VAR") {
      ++pos_;
      return Term::var(expect_name("a schematic-variable name"));
    }
    if (t == "BOUND") {
      ++pos_;
      if (at_end() || !is_nat(toks_[pos_]))
        throw SyntaxError(pos_, "a nonnegative de Bruijn index");
      std::size_t k = std::stoull(toks_[pos_]);
      ++pos_;
      return Term::bound(k);
    }
    if (t == "ABS") {
      ++pos_;
      expect("(");
      TermPtr body = parse_term();
      expect(")");
      return Term::abs(std::move(body));
    }
    if (t == "(") {
      ++pos_;
      TermPtr inner = parse_term();
      expect(")");
      return inner;
    }
    throw SyntaxError(pos_, "an atom (CONST/FREE/VAR/BOUND/ABS or '(')");
  }

  const TokenSeq& toks_;
  std::size_t pos_ = 0;
};

inline void serialize_into(const Term& t, TokenSeq& out, bool as_argument) {
  switch (t.kind) {
    case TermKind::Const:
      out.push_back("CONST");
      out.push_back(t.name);
      return;
    case TermKind::Free:
      out.push_back("FREE");
      out.push_back(t.name);
      return;
    case TermKind::Var:
      out.push_back("VAR");
      out.push_back(t.name);
      return;
    case TermKind::Bound:
      out.push_back("BOUND");
      out.push_back(std::to_string(t.index));
      return;
    case TermKind::Abs:
      out.push_back("ABS");
      out.push_back("(");
      serialize_into(*t.child, out, false);
      out.push_back(")");
      return;
    case TermKind::App: {
      bool paren = as_argument;  // an App in argument position needs parens
      if (paren) out.push_back("(");
      serialize_into(*t.child, out, false);
      out.push_back("$");
      serialize_into(*t.arg, out, true);
      if (paren) out.push_back(")");
      return;
    }
  }
}

}  // namespace detail

inline TermPtr parse_tokens(const TokenSeq& tokens) {
  return detail::TermParser(tokens).run();
}

inline TokenSeq serialize(const Term& term) {
  TokenSeq out;
  detail::serialize_into(term, out, false);
  return out;
}

inline TokenSeq serialize(const TermPtr& term) { return serialize(*term); }

/// True iff every BOUND k sits under more than k ABS binders.
inline bool closed(const Term& term, std::size_t depth = 0) {
  switch (term.kind) {
    case TermKind::Const:
    case TermKind::Free:
    case TermKind::Var:
      return true;
    case TermKind::Bound:
      return term.index < depth;
    case TermKind::Abs:
      return closed(*term.child, depth + 1);
    case TermKind::App:
      return closed(*term.child, depth) && closed(*term.arg, depth);
  }
  return true;
}

inline bool closed(const TermPtr& term) { return closed(*term); }

inline std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

inline TokenSeq split_tokens(const std::string& line) {
  TokenSeq out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace isarforge

#ifndef DML_LOGIC_HPP
#define DML_LOGIC_HPP

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dml/nominal.hpp"

namespace dml {

// ---------------------------------------------------------------------------
// AST for (semi-)rigidly guarded MSO with data tests. Data comparisons in a
// grammar-conformant formula occur only inside RigidTest / SemiRigidTest
// nodes; RawTest exists so that unguarded inputs still parse and can be
// rejected by the grammar check.

enum class NodeKind {
  True,
  False,
  Less,
  Eq,
  TagAtom,
  In,
  Succ,
  First,
  Last,
  Not,
  And,
  Or,
  Implies,
  Iff,
  ExistsFO,
  ForallFO,
  ExistsSO,
  ForallSO,
  RigidTest,
  SemiRigidTest,
  RawTest,
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  NodeKind kind;
  std::string v1, v2, v3;  // variable slots; see the factory functions
  Tag tag;                 // TagAtom
  FormulaPtr a, b;         // children; guard(s) for test nodes
  bool neq = false;        // test polarity: true for !~

  mutable std::optional<std::set<std::string>> cachedFreeFO, cachedFreeSO;
};

inline bool is_so_var(const std::string& v) {
  return !v.empty() && (std::isupper(static_cast<unsigned char>(v[0])) || v[0] == '$');
}

namespace mk {

inline FormulaPtr node(Formula f) { return std::make_shared<Formula>(std::move(f)); }
inline FormulaPtr tru() { return node({NodeKind::True}); }
inline FormulaPtr fls() { return node({NodeKind::False}); }
inline FormulaPtr less(std::string x, std::string y) {
  return node({NodeKind::Less, std::move(x), std::move(y)});
}
inline FormulaPtr eq(std::string x, std::string y) {
  return node({NodeKind::Eq, std::move(x), std::move(y)});
}
inline FormulaPtr succ(std::string x, std::string y) {
  return node({NodeKind::Succ, std::move(x), std::move(y)});
}
inline FormulaPtr first(std::string x) { return node({NodeKind::First, std::move(x)}); }
inline FormulaPtr last(std::string x) { return node({NodeKind::Last, std::move(x)}); }
inline FormulaPtr tag_atom(Tag t, std::string x) {
  Formula f{NodeKind::TagAtom, std::move(x)};
  f.tag = std::move(t);
  return node(std::move(f));
}
inline FormulaPtr in(std::string x, std::string Y) {
  return node({NodeKind::In, std::move(x), std::move(Y)});
}
inline FormulaPtr lnot(FormulaPtr a) {
  Formula f{NodeKind::Not};
  f.a = std::move(a);
  return node(std::move(f));
}
inline FormulaPtr land(FormulaPtr a, FormulaPtr b) {
  Formula f{NodeKind::And};
  f.a = std::move(a);
  f.b = std::move(b);
  return node(std::move(f));
}
inline FormulaPtr lor(FormulaPtr a, FormulaPtr b) {
  Formula f{NodeKind::Or};
  f.a = std::move(a);
  f.b = std::move(b);
  return node(std::move(f));
}
inline FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  Formula f{NodeKind::Implies};
  f.a = std::move(a);
  f.b = std::move(b);
  return node(std::move(f));
}
inline FormulaPtr iff(FormulaPtr a, FormulaPtr b) {
  Formula f{NodeKind::Iff};
  f.a = std::move(a);
  f.b = std::move(b);
  return node(std::move(f));
}
inline FormulaPtr exists(std::string v, FormulaPtr body) {
  Formula f{is_so_var(v) ? NodeKind::ExistsSO : NodeKind::ExistsFO, std::move(v)};
  f.a = std::move(body);
  return node(std::move(f));
}
inline FormulaPtr forall(std::string v, FormulaPtr body) {
  Formula f{is_so_var(v) ? NodeKind::ForallSO : NodeKind::ForallFO, std::move(v)};
  f.a = std::move(body);
  return node(std::move(f));
}
inline FormulaPtr rigid_test(FormulaPtr guard, std::string x, std::string y, bool neq) {
  Formula f{NodeKind::RigidTest, std::move(x), std::move(y)};
  f.a = std::move(guard);
  f.neq = neq;
  return node(std::move(f));
}
inline FormulaPtr semirigid_test(FormulaPtr alpha, FormulaPtr beta, std::string x, std::string y,
                                 std::string z, bool neq) {
  Formula f{NodeKind::SemiRigidTest, std::move(x), std::move(y), std::move(z)};
  f.a = std::move(alpha);
  f.b = std::move(beta);
  f.neq = neq;
  return node(std::move(f));
}
inline FormulaPtr raw_test(std::string x, std::string y, bool neq) {
  Formula f{NodeKind::RawTest, std::move(x), std::move(y)};
  f.neq = neq;
  return node(std::move(f));
}

}  // namespace mk

// ---------------------------------------------------------------------------
// Free variables.

namespace detail {

inline void collect_free(const Formula& f, std::set<std::string>& fo, std::set<std::string>& so) {
  auto var = [&](const std::string& v) {
    if (v.empty()) return;
    (is_so_var(v) ? so : fo).insert(v);
  };
  switch (f.kind) {
    case NodeKind::True:
    case NodeKind::False:
      break;
    case NodeKind::Less:
    case NodeKind::Eq:
    case NodeKind::Succ:
    case NodeKind::In:
    case NodeKind::RawTest:
      var(f.v1);
      var(f.v2);
      break;
    case NodeKind::TagAtom:
    case NodeKind::First:
    case NodeKind::Last:
      var(f.v1);
      break;
    case NodeKind::Not:
      collect_free(*f.a, fo, so);
      break;
    case NodeKind::And:
    case NodeKind::Or:
    case NodeKind::Implies:
    case NodeKind::Iff:
      collect_free(*f.a, fo, so);
      collect_free(*f.b, fo, so);
      break;
    case NodeKind::ExistsFO:
    case NodeKind::ForallFO:
    case NodeKind::ExistsSO:
    case NodeKind::ForallSO: {
      std::set<std::string> innerFo, innerSo;
      collect_free(*f.a, innerFo, innerSo);
      innerFo.erase(f.v1);
      innerSo.erase(f.v1);
      fo.insert(innerFo.begin(), innerFo.end());
      so.insert(innerSo.begin(), innerSo.end());
      break;
    }
    case NodeKind::RigidTest:
      collect_free(*f.a, fo, so);
      var(f.v1);
      var(f.v2);
      break;
    case NodeKind::SemiRigidTest:
      collect_free(*f.a, fo, so);
      collect_free(*f.b, fo, so);
      var(f.v1);
      var(f.v2);
      var(f.v3);
      break;
  }
}

}  // namespace detail

inline const std::set<std::string>& free_fo(const FormulaPtr& f) {
  if (!f->cachedFreeFO) {
    std::set<std::string> fo, so;
    detail::collect_free(*f, fo, so);
    f->cachedFreeFO = fo;
    f->cachedFreeSO = so;
  }
  return *f->cachedFreeFO;
}

inline const std::set<std::string>& free_so(const FormulaPtr& f) {
  free_fo(f);
  return *f->cachedFreeSO;
}

// ---------------------------------------------------------------------------
// Printing (stable serialization; also used as a structural key).

inline std::string to_string(const FormulaPtr& f) {
  using K = NodeKind;
  switch (f->kind) {
    case K::True:
      return "true";
    case K::False:
      return "false";
    case K::Less:
      return f->v1 + " < " + f->v2;
    case K::Eq:
      return f->v1 + " = " + f->v2;
    case K::Succ:
      return "succ(" + f->v1 + "," + f->v2 + ")";
    case K::First:
      return "first(" + f->v1 + ")";
    case K::Last:
      return "last(" + f->v1 + ")";
    case K::TagAtom:
      return f->tag + "(" + f->v1 + ")";
    case K::In:
      return f->v1 + " in " + f->v2;
    case K::Not:
      return "!(" + to_string(f->a) + ")";
    case K::And:
      return "(" + to_string(f->a) + " & " + to_string(f->b) + ")";
    case K::Or:
      return "(" + to_string(f->a) + " | " + to_string(f->b) + ")";
    case K::Implies:
      return "(" + to_string(f->a) + " -> " + to_string(f->b) + ")";
    case K::Iff:
      return "(" + to_string(f->a) + " <-> " + to_string(f->b) + ")";
    case K::ExistsFO:
    case K::ExistsSO:
      return "(E " + f->v1 + ". " + to_string(f->a) + ")";
    case K::ForallFO:
    case K::ForallSO:
      return "(A " + f->v1 + ". " + to_string(f->a) + ")";
    case K::RigidTest:
      return "rigid[" + to_string(f->a) + "](" + f->v1 + "," + f->v2 + "){" + f->v1 +
             (f->neq ? " !~ " : " ~ ") + f->v2 + "}";
    case K::SemiRigidTest:
      return "semirigid[" + to_string(f->a) + "; " + to_string(f->b) + "](" + f->v1 + "," + f->v2 +
             "," + f->v3 + "){" + f->v2 + (f->neq ? " !~ " : " ~ ") + f->v3 + "}";
    case K::RawTest:
      return f->v1 + (f->neq ? " !~ " : " ~ ") + f->v2;
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parser.

namespace detail {

struct Token {
  enum Kind {
    Ident,
    Sym,
    End,
  } kind;
  std::string text;
  int line, col;
};

class Lexer {
public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DmlError("parse error at line " + std::to_string(tok_.line) + ", col " +
                   std::to_string(tok_.col) + ": " + msg);
  }

private:
  void advance() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        col_ = 1;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++col_;
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_ = {Token::End, "", line_, col_};
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::string id;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_' || src_[pos_] == '$')) {
        id += src_[pos_++];
        ++col_;
      }
      tok_ = {Token::Ident, id, tok_.line, tok_.col};
      return;
    }
    static const std::vector<std::string> syms = {"<->", "->", "!~", "!=", "(", ")", "[", "]",
                                                  "{",   "}", ",", ";", ".", "<", "=", "~",
                                                  "&",   "|", "!"};
    for (const auto& s : syms) {
      if (src_.compare(pos_, s.size(), s) == 0) {
        pos_ += s.size();
        col_ += static_cast<int>(s.size());
        tok_ = {Token::Sym, s, tok_.line, tok_.col};
        return;
      }
    }
    tok_ = {Token::Sym, std::string(1, c), tok_.line, tok_.col};
    throw DmlError("parse error at line " + std::to_string(line_) + ", col " +
                   std::to_string(col_) + ": unexpected character '" + std::string(1, c) + "'");
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

class Parser {
public:
  explicit Parser(const std::string& src) : lex_(src) {}

  FormulaPtr parse() {
    FormulaPtr f = iff();
    if (lex_.peek().kind != Token::End) lex_.fail("trailing input '" + lex_.peek().text + "'");
    return f;
  }

private:
  bool accept_sym(const std::string& s) {
    if (lex_.peek().kind == Token::Sym && lex_.peek().text == s) {
      lex_.next();
      return true;
    }
    return false;
  }

  void expect_sym(const std::string& s) {
    if (!accept_sym(s)) lex_.fail("expected '" + s + "'");
  }

  std::string expect_ident() {
    if (lex_.peek().kind != Token::Ident) lex_.fail("expected an identifier");
    return lex_.next().text;
  }

  FormulaPtr iff() {
    FormulaPtr f = implies();
    while (accept_sym("<->")) f = mk::iff(f, implies());
    return f;
  }

  FormulaPtr implies() {
    FormulaPtr f = disj();
    if (accept_sym("->")) return mk::implies(f, implies());
    return f;
  }

  FormulaPtr disj() {
    FormulaPtr f = conj();
    while (accept_sym("|")) f = mk::lor(f, conj());
    return f;
  }

  FormulaPtr conj() {
    FormulaPtr f = unary();
    while (accept_sym("&")) f = mk::land(f, unary());
    return f;
  }

  FormulaPtr unary() {
    if (accept_sym("!")) return mk::lnot(unary());
    if (lex_.peek().kind == Token::Ident && (lex_.peek().text == "E" || lex_.peek().text == "A")) {
      bool ex = lex_.next().text == "E";
      std::vector<std::string> vars;
      vars.push_back(expect_ident());
      while (accept_sym(",")) vars.push_back(expect_ident());
      expect_sym(".");
      FormulaPtr body = iff();
      for (auto it = vars.rbegin(); it != vars.rend(); ++it)
        body = ex ? mk::exists(*it, body) : mk::forall(*it, body);
      return body;
    }
    return primary();
  }

  FormulaPtr primary() {
    if (accept_sym("(")) {
      FormulaPtr f = iff();
      expect_sym(")");
      return f;
    }
    const Token& t = lex_.peek();
    if (t.kind != Token::Ident) lex_.fail("expected a formula");
    std::string id = lex_.next().text;
    if (id == "true") return mk::tru();
    if (id == "false") return mk::fls();
    if (id == "rigid") return rigid_tail();
    if (id == "semirigid") return semirigid_tail();
    if (lex_.peek().kind == Token::Sym && lex_.peek().text == "(") {
      lex_.next();
      std::string x = expect_ident();
      if (id == "succ") {
        expect_sym(",");
        std::string y = expect_ident();
        expect_sym(")");
        return mk::succ(x, y);
      }
      expect_sym(")");
      if (id == "first") return mk::first(x);
      if (id == "last") return mk::last(x);
      return mk::tag_atom(id, x);
    }
    // id is a variable: relational atom follows.
    if (accept_sym("<")) return mk::less(id, expect_ident());
    if (accept_sym("=")) return mk::eq(id, expect_ident());
    if (accept_sym("!=")) return mk::lnot(mk::eq(id, expect_ident()));
    if (accept_sym("~")) return mk::raw_test(id, expect_ident(), false);
    if (accept_sym("!~")) return mk::raw_test(id, expect_ident(), true);
    if (lex_.peek().kind == Token::Ident && lex_.peek().text == "in") {
      lex_.next();
      return mk::in(id, expect_ident());
    }
    lex_.fail("expected an atom after '" + id + "'");
  }

  FormulaPtr rigid_tail() {
    expect_sym("[");
    FormulaPtr guard = iff();
    expect_sym("]");
    std::optional<std::pair<std::string, std::string>> declared;
    if (accept_sym("(")) {
      std::string x = expect_ident();
      expect_sym(",");
      std::string y = expect_ident();
      expect_sym(")");
      declared = {x, y};
    }
    expect_sym("{");
    std::string x = expect_ident();
    bool neq = false;
    if (accept_sym("!~"))
      neq = true;
    else
      expect_sym("~");
    std::string y = expect_ident();
    expect_sym("}");
    if (declared && (declared->first != x || declared->second != y))
      lex_.fail("rigid test variables disagree between (...) and {...}");
    return mk::rigid_test(guard, x, y, neq);
  }

  FormulaPtr semirigid_tail() {
    expect_sym("[");
    FormulaPtr alpha = iff();
    expect_sym(";");
    FormulaPtr beta = iff();
    expect_sym("]");
    expect_sym("(");
    std::string x = expect_ident();
    expect_sym(",");
    std::string y = expect_ident();
    expect_sym(",");
    std::string z = expect_ident();
    expect_sym(")");
    expect_sym("{");
    std::string by = expect_ident();
    bool neq = false;
    if (accept_sym("!~"))
      neq = true;
    else
      expect_sym("~");
    std::string bz = expect_ident();
    expect_sym("}");
    if (by != y || bz != z) lex_.fail("semirigid test compares the wrong variables");
    return mk::semirigid_test(alpha, beta, x, y, z, neq);
  }

  Lexer lex_;
};

}  // namespace detail

inline FormulaPtr parse_formula(const std::string& src) { return detail::Parser(src).parse(); }

// ---------------------------------------------------------------------------
// Direct evaluation.

struct Assignment {
  std::map<std::string, std::size_t> fo;           // 1-based positions
  std::map<std::string, std::set<std::size_t>> so;
};

struct EvalOptions {
  std::size_t maxWordLen = 18;  // cap for second-order subset enumeration
};

inline bool evaluate(const FormulaPtr& f, const DataWord& w, const Assignment& asg,
                     const EvalOptions& opt = {});

namespace detail {

inline std::size_t fo_at(const Assignment& asg, const std::string& v) {
  auto it = asg.fo.find(v);
  if (it == asg.fo.end()) throw DmlError("unbound first-order variable '" + v + "'");
  return it->second;
}

inline const std::set<std::size_t>& so_at(const Assignment& asg, const std::string& v) {
  auto it = asg.so.find(v);
  if (it == asg.so.end()) throw DmlError("unbound second-order variable '" + v + "'");
  return it->second;
}

}  // namespace detail

inline bool evaluate(const FormulaPtr& f, const DataWord& w, const Assignment& asg,
                     const EvalOptions& opt) {
  using K = NodeKind;
  switch (f->kind) {
    case K::True:
      return true;
    case K::False:
      return false;
    case K::Less:
      return detail::fo_at(asg, f->v1) < detail::fo_at(asg, f->v2);
    case K::Eq:
      return detail::fo_at(asg, f->v1) == detail::fo_at(asg, f->v2);
    case K::Succ:
      return detail::fo_at(asg, f->v1) + 1 == detail::fo_at(asg, f->v2);
    case K::First:
      return detail::fo_at(asg, f->v1) == 1;
    case K::Last:
      return detail::fo_at(asg, f->v1) == w.size();
    case K::TagAtom:
      return w.at(detail::fo_at(asg, f->v1)).tag == f->tag;
    case K::In:
      return detail::so_at(asg, f->v2).count(detail::fo_at(asg, f->v1)) > 0;
    case K::Not:
      return !evaluate(f->a, w, asg, opt);
    case K::And:
      return evaluate(f->a, w, asg, opt) && evaluate(f->b, w, asg, opt);
    case K::Or:
      return evaluate(f->a, w, asg, opt) || evaluate(f->b, w, asg, opt);
    case K::Implies:
      return !evaluate(f->a, w, asg, opt) || evaluate(f->b, w, asg, opt);
    case K::Iff:
      return evaluate(f->a, w, asg, opt) == evaluate(f->b, w, asg, opt);
    case K::ExistsFO:
    case K::ForallFO: {
      bool ex = f->kind == K::ExistsFO;
      Assignment a2 = asg;
      for (std::size_t p = 1; p <= w.size(); ++p) {
        a2.fo[f->v1] = p;
        if (evaluate(f->a, w, a2, opt) == ex) return ex;
      }
      return !ex;
    }
    case K::ExistsSO:
    case K::ForallSO: {
      bool ex = f->kind == K::ExistsSO;
      if (w.size() > opt.maxWordLen)
        throw DmlError("word-too-long: second-order quantification over a word of length " +
                       std::to_string(w.size()) + " exceeds the configured bound");
      Assignment a2 = asg;
      std::size_t n = w.size();
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::set<std::size_t> U;
        for (std::size_t p = 0; p < n; ++p)
          if (mask & (std::size_t{1} << p)) U.insert(p + 1);
        a2.so[f->v1] = std::move(U);
        if (evaluate(f->a, w, a2, opt) == ex) return ex;
      }
      return !ex;
    }
    case K::RigidTest: {
      if (!evaluate(f->a, w, asg, opt)) return false;
      bool same =
          w.at(detail::fo_at(asg, f->v1)).value == w.at(detail::fo_at(asg, f->v2)).value;
      return f->neq ? !same : same;
    }
    case K::SemiRigidTest: {
      if (!evaluate(f->a, w, asg, opt)) return false;
      if (!evaluate(f->b, w, asg, opt)) return false;
      bool same =
          w.at(detail::fo_at(asg, f->v2)).value == w.at(detail::fo_at(asg, f->v3)).value;
      return f->neq ? !same : same;
    }
    case K::RawTest: {
      bool same =
          w.at(detail::fo_at(asg, f->v1)).value == w.at(detail::fo_at(asg, f->v2)).value;
      return f->neq ? !same : same;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Substitution of free first-order variables (replacement names must be
// globally fresh; callers use fresh_var).

inline FormulaPtr substitute_fo(const FormulaPtr& f,
                                const std::map<std::string, std::string>& repl) {
  auto sub = [&](const std::string& v) {
    auto it = repl.find(v);
    return it == repl.end() ? v : it->second;
  };
  Formula g = *f;
  g.cachedFreeFO.reset();
  g.cachedFreeSO.reset();
  switch (f->kind) {
    case NodeKind::ExistsFO:
    case NodeKind::ForallFO:
    case NodeKind::ExistsSO:
    case NodeKind::ForallSO: {
      std::map<std::string, std::string> inner = repl;
      inner.erase(f->v1);
      g.a = substitute_fo(f->a, inner);
      return mk::node(std::move(g));
    }
    default:
      break;
  }
  g.v1 = sub(f->v1);
  g.v2 = sub(f->v2);
  g.v3 = sub(f->v3);
  if (f->a) g.a = substitute_fo(f->a, repl);
  if (f->b) g.b = substitute_fo(f->b, repl);
  return mk::node(std::move(g));
}

inline std::string fresh_var(const FormulaPtr& f, const std::string& base) {
  std::set<std::string> used;
  std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& g) {
    if (!g) return;
    used.insert(g->v1);
    used.insert(g->v2);
    used.insert(g->v3);
    walk(g->a);
    walk(g->b);
  };
  walk(f);
  for (int i = 0;; ++i) {
    std::string cand = base + std::to_string(i);
    if (!used.count(cand)) return cand;
  }
}

// The tilde transform: phi(x,y) strengthened so that the result is rigid on
// every word and equivalent to phi whenever phi was already rigid.
inline FormulaPtr rigidify(const FormulaPtr& phi, const std::string& x, const std::string& y) {
  std::string x2 = fresh_var(phi, x + "_");
  std::string y2 = fresh_var(phi, y + "_");
  FormulaPtr copy = substitute_fo(phi, {{x, x2}, {y, y2}});
  FormulaPtr cond = mk::forall(
      x2, mk::forall(y2, mk::implies(copy, mk::iff(mk::eq(x, x2), mk::eq(y, y2)))));
  return mk::land(phi, cond);
}

// ---------------------------------------------------------------------------
// Guarded-test normalization: replaces each test node (innermost first) by a
// fresh unary predicate read through a reserved second-order variable $c<i>.

struct GuardedTestDescriptor {
  FormulaPtr alpha;  // alpha^-(x, y): inner tests already replaced
  FormulaPtr beta;   // beta^-(x, z); for rigid tests this is x = z
  std::string x, y, z;
  bool neq = false;
  bool fromRigid = false;
  std::string predicate;  // "$c<i>"
};

struct NormalizedFormula {
  FormulaPtr core;  // data-test-free
  std::vector<GuardedTestDescriptor> tests;
};

inline NormalizedFormula normalize_tests(const FormulaPtr& f) {
  NormalizedFormula out;
  std::function<FormulaPtr(const FormulaPtr&)> walk = [&](const FormulaPtr& g) -> FormulaPtr {
    Formula h = *g;
    h.cachedFreeFO.reset();
    h.cachedFreeSO.reset();
    if (g->a) h.a = walk(g->a);
    if (g->b) h.b = walk(g->b);
    if (g->kind == NodeKind::RigidTest || g->kind == NodeKind::SemiRigidTest) {
      GuardedTestDescriptor d;
      d.neq = g->neq;
      d.predicate = "$c" + std::to_string(out.tests.size() + 1);
      FormulaPtr guardsHold;
      if (g->kind == NodeKind::RigidTest) {
        d.fromRigid = true;
        d.x = g->v1;
        d.y = g->v2;
        d.z = fresh_var(g, "z_");
        d.alpha = h.a;
        d.beta = mk::eq(d.x, d.z);
        guardsHold = h.a;
      } else {
        d.x = g->v1;
        d.y = g->v2;
        d.z = g->v3;
        d.alpha = h.a;
        d.beta = h.b;
        guardsHold = mk::land(h.a, h.b);
      }
      FormulaPtr pred = mk::in(d.x, d.predicate);
      if (d.neq) pred = mk::lnot(pred);
      out.tests.push_back(d);
      return mk::land(guardsHold, pred);
    }
    if (g->kind == NodeKind::RawTest)
      throw DmlError("normalize_tests: formula contains an unguarded data test");
    return mk::node(std::move(h));
  };
  out.core = walk(f);
  return out;
}

// True when the formula contains no data test of any kind.
inline bool data_test_free(const FormulaPtr& f) {
  if (!f) return true;
  if (f->kind == NodeKind::RigidTest || f->kind == NodeKind::SemiRigidTest ||
      f->kind == NodeKind::RawTest)
    return false;
  return data_test_free(f->a) && data_test_free(f->b);
}

}  // namespace dml

#endif

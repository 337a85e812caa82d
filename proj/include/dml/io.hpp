#ifndef DML_IO_HPP
#define DML_IO_HPP

#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>

#include "dml/morphism_types.hpp"
#include "dml/presentation.hpp"

namespace dml {

namespace detail {

struct LineScanner {
  std::string text;
  int lineNo = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw DmlError("line " + std::to_string(lineNo) + ": " + msg);
  }
};

// A term pattern in a rule: orbit name plus value tokens (numbers or
// variable identifiers).
struct TermPattern {
  std::string orbit;
  std::vector<std::string> tokens;
};

inline std::string strip_comment(const std::string& line) {
  auto h = line.find('#');
  return h == std::string::npos ? line : line.substr(0, h);
}

inline TermPattern parse_term_pattern(const std::string& s, const LineScanner& ls) {
  auto lp = s.find('(');
  auto rp = s.rfind(')');
  if (lp == std::string::npos || rp == std::string::npos || rp < lp)
    ls.fail("expected term like name(...) but got '" + s + "'");
  TermPattern p;
  p.orbit = s.substr(0, lp);
  std::string inner = s.substr(lp + 1, rp - lp - 1);
  std::string tok;
  std::istringstream in(inner);
  while (std::getline(in, tok, ',')) {
    std::string t;
    for (char c : tok)
      if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (!t.empty()) p.tokens.push_back(t);
  }
  if (p.orbit.empty()) ls.fail("term with empty orbit name");
  return p;
}

inline bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
}

// Splits "lhs1 lhs2 = rhs" shaped rule bodies on whitespace and '='.
inline std::vector<std::string> split_rule(const std::string& body, const LineScanner& ls,
                                           int expectedLhs) {
  auto eq = body.find('=');
  if (eq == std::string::npos) ls.fail("rule missing '='");
  std::istringstream lhs(body.substr(0, eq));
  std::vector<std::string> parts;
  std::string tok;
  while (lhs >> tok) parts.push_back(tok);
  if (static_cast<int>(parts.size()) != expectedLhs)
    ls.fail("expected " + std::to_string(expectedLhs) + " terms before '='");
  std::string rhs = body.substr(eq + 1);
  std::string r;
  std::istringstream rin(rhs);
  while (rin >> tok) r += tok;
  parts.push_back(r);
  return parts;
}

inline void close_symmetry(OrbitSymmetry& sym) {
  // Close the generator set under composition.
  auto key = [](const std::vector<int>& p) { return p; };
  std::set<std::vector<int>> have;
  for (auto& p : sym.perms) have.insert(key(p));
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<std::vector<int>> cur(have.begin(), have.end());
    for (const auto& a : cur)
      for (const auto& b : cur) {
        std::vector<int> c(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) c[i] = b[static_cast<std::size_t>(a[i])];
        if (have.insert(c).second) grew = true;
      }
  }
  sym.perms.assign(have.begin(), have.end());
}

}  // namespace detail

struct LoadedMonoid {
  std::shared_ptr<Presentation> presentation;
  // Present only when the file carried letter/accept lines.
  std::optional<Morphism> morphism;
  std::set<std::string> accepting;  // orbit names
};

// Line-oriented presentation / recognizer format; see the README for the
// grammar. Rules may use symbolic variables with distinctness implied; each
// symbolic rule denotes exactly one minimal pair.
inline LoadedMonoid load_monoid_text(const std::string& text) {
  auto P = std::make_shared<Presentation>();
  detail::LineScanner ls;
  std::istringstream in(text);
  std::string rawLine;

  struct ProdRule {
    detail::TermPattern a, b, r;
    int line;
  };
  struct NormRule {
    detail::TermPattern a, r;
    int line;
  };
  std::vector<ProdRule> prodRules;
  std::vector<NormRule> normRules;
  std::vector<std::pair<std::string, detail::TermPattern>> letterRules;  // tag -> image
  std::vector<std::string> acceptNames;
  bool sawLetters = false, sawAccept = false;

  while (std::getline(in, rawLine)) {
    ++ls.lineNo;
    std::string line = detail::strip_comment(rawLine);
    std::istringstream l(line);
    std::string kw;
    if (!(l >> kw)) continue;
    if (kw == "monoid") {
      l >> P->name;
    } else if (kw == "support") {
      unsigned long c = 0;
      if (!(l >> c) || c == 0) ls.fail("support needs a positive number");
      P->support = static_cast<DataValue>(c);
    } else if (kw == "orbit") {
      std::string decl, extra;
      if (!(l >> decl)) ls.fail("orbit needs name/arity");
      auto slash = decl.find('/');
      if (slash == std::string::npos) ls.fail("orbit declaration needs name/arity");
      OrbitName o;
      o.name = decl.substr(0, slash);
      if (!detail::is_number(decl.substr(slash + 1))) ls.fail("bad orbit arity");
      o.arity = std::stoi(decl.substr(slash + 1));
      if (P->orbit_id(o.name) >= 0) ls.fail("duplicate orbit '" + o.name + "'");
      P->orbits.push_back(o);
      P->symmetry.push_back(OrbitSymmetry::trivial(o.arity));
      if (l >> extra) {
        if (extra != "identity") ls.fail("unexpected token '" + extra + "'");
        if (o.arity != 0) ls.fail("identity orbit must have arity 0");
        if (P->identity >= 0) ls.fail("two identity orbits");
        P->identity = static_cast<OrbitId>(P->orbits.size() - 1);
      }
    } else if (kw == "norm") {
      std::string body;
      std::getline(l, body);
      auto parts = detail::split_rule(body, ls, 1);
      normRules.push_back({detail::parse_term_pattern(parts[0], ls),
                           detail::parse_term_pattern(parts[1], ls), ls.lineNo});
    } else if (kw == "prod") {
      std::string body;
      std::getline(l, body);
      auto parts = detail::split_rule(body, ls, 2);
      prodRules.push_back({detail::parse_term_pattern(parts[0], ls),
                           detail::parse_term_pattern(parts[1], ls),
                           detail::parse_term_pattern(parts[2], ls), ls.lineNo});
    } else if (kw == "letter") {
      std::string body;
      std::getline(l, body);
      auto parts = detail::split_rule(body, ls, 1);
      sawLetters = true;
      letterRules.emplace_back(parts[0], detail::parse_term_pattern(parts[1], ls));
    } else if (kw == "accept") {
      std::string n;
      sawAccept = true;
      while (l >> n) acceptNames.push_back(n);
    } else {
      ls.fail("unknown keyword '" + kw + "'");
    }
  }

  if (P->identity < 0) throw DmlError("no identity orbit declared");
  if (P->support == 0) throw DmlError("no support declared");

  auto orbitOf = [&](const detail::TermPattern& p, int line) -> OrbitId {
    OrbitId id = P->orbit_id(p.orbit);
    ls.lineNo = line;
    if (id < 0) ls.fail("unknown orbit '" + p.orbit + "'");
    if (static_cast<int>(p.tokens.size()) != P->arity(id))
      ls.fail("arity mismatch for '" + p.orbit + "'");
    return id;
  };

  // Normalizer rules become per-orbit position symmetries.
  for (const auto& nr : normRules) {
    OrbitId id = orbitOf(nr.a, nr.line);
    ls.lineNo = nr.line;
    if (nr.r.orbit != nr.a.orbit) ls.fail("norm rule must stay within one orbit");
    int k = P->arity(id);
    auto& sym = P->symmetry[static_cast<std::size_t>(id)];
    if (k == 2 && nr.r.tokens.size() == 2 && nr.r.tokens[0] == "min" && nr.r.tokens[1] == "max") {
      sym.perms.push_back({1, 0});
    } else {
      if (static_cast<int>(nr.r.tokens.size()) != k) ls.fail("norm rhs arity mismatch");
      std::vector<int> perm(static_cast<std::size_t>(k), -1);
      for (int i = 0; i < k; ++i) {
        auto it = std::find(nr.a.tokens.begin(), nr.a.tokens.end(), nr.r.tokens[static_cast<std::size_t>(i)]);
        if (it == nr.a.tokens.end()) ls.fail("norm rhs uses unknown variable");
        perm[static_cast<std::size_t>(i)] = static_cast<int>(it - nr.a.tokens.begin());
      }
      sym.perms.push_back(perm);
    }
    detail::close_symmetry(sym);
  }

  // Expand each product rule into its minimal pair.
  for (const auto& pr : prodRules) {
    OrbitId a = orbitOf(pr.a, pr.line);
    OrbitId b = orbitOf(pr.b, pr.line);
    OrbitId r = orbitOf(pr.r, pr.line);
    ls.lineNo = pr.line;
    std::map<std::string, DataValue> bind;
    int k = P->arity(a);
    for (int i = 0; i < k; ++i) {
      const std::string& tok = pr.a.tokens[static_cast<std::size_t>(i)];
      DataValue want = static_cast<DataValue>(i + 1);
      if (detail::is_number(tok)) {
        if (std::stoul(tok) != want) ls.fail("left term of a rule must be orbit(1..k)");
      } else {
        if (bind.count(tok)) ls.fail("variable '" + tok + "' repeated in left term");
        bind[tok] = want;
      }
    }
    DataValue fresh = static_cast<DataValue>(k);
    std::vector<DataValue> bVals;
    for (const std::string& tok : pr.b.tokens) {
      DataValue v;
      if (detail::is_number(tok)) {
        v = static_cast<DataValue>(std::stoul(tok));
        if (v > fresh) {
          if (v != fresh + 1) ls.fail("second term is not in minimal-pair form");
          fresh = v;
        }
      } else if (bind.count(tok)) {
        v = bind[tok];
      } else {
        v = ++fresh;
        bind[tok] = v;
      }
      if (std::find(bVals.begin(), bVals.end(), v) != bVals.end())
        ls.fail("second term repeats a value");
      bVals.push_back(v);
    }
    std::vector<DataValue> rVals;
    for (const std::string& tok : pr.r.tokens) {
      DataValue v;
      if (detail::is_number(tok)) {
        v = static_cast<DataValue>(std::stoul(tok));
      } else {
        auto it = bind.find(tok);
        if (it == bind.end()) ls.fail("result uses unbound variable '" + tok + "'");
        v = it->second;
      }
      rVals.push_back(v);
    }
    Presentation::PairKey key{a, b, bVals};
    Term result = P->normalize(P->check_term(Term{r, rVals}));
    auto [it, fresh2] = P->products.emplace(key, result);
    if (!fresh2 && !(it->second == result)) ls.fail("conflicting product rules");
  }

  // Identity rows are implied; fill any that the file omitted.
  for (OrbitId o = 0; o < static_cast<OrbitId>(P->orbits.size()); ++o) {
    int k = P->arity(o);
    std::vector<DataValue> vals(static_cast<std::size_t>(k));
    std::iota(vals.begin(), vals.end(), 1);
    Term t = P->normalize(Term{o, vals});
    P->products.emplace(Presentation::PairKey{P->identity, o, vals}, t);
    P->products.emplace(Presentation::PairKey{o, P->identity, {}}, Term{o, vals});
  }

  LoadedMonoid out;
  out.presentation = P;
  if (sawLetters || sawAccept) {
    Morphism h;
    h.target = P;
    for (auto& [tag, pat] : letterRules) {
      OrbitId id = P->orbit_id(pat.orbit);
      if (id < 0) throw DmlError("letter image uses unknown orbit '" + pat.orbit + "'");
      LetterImage img;
      img.orbit = id;
      if (pat.tokens.size() > 1)
        throw DmlError("letter image may use at most the letter's own value");
      img.usesValue = !pat.tokens.empty();
      if (img.usesValue && detail::is_number(pat.tokens[0]))
        throw DmlError("letter image value must be a variable standing for the input value");
      if (static_cast<int>(pat.tokens.size()) != P->arity(id))
        throw DmlError("letter image arity mismatch for orbit '" + pat.orbit + "'");
      h.images[tag] = img;
    }
    out.morphism = std::move(h);
    for (auto& n : acceptNames) {
      if (P->orbit_id(n) < 0) throw DmlError("accept uses unknown orbit '" + n + "'");
      out.accepting.insert(n);
    }
  }
  return out;
}

inline LoadedMonoid load_monoid_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DmlError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_monoid_text(ss.str());
}

inline std::string save_monoid_text(const Presentation& P, const Morphism* h,
                                    const std::set<std::string>* accepting) {
  std::ostringstream out;
  out << "monoid " << (P.name.empty() ? std::string("m") : P.name) << "\n";
  out << "support " << P.support << "\n";
  for (OrbitId o = 0; o < static_cast<OrbitId>(P.orbits.size()); ++o) {
    out << "orbit " << P.orbit(o).name << "/" << P.arity(o);
    if (o == P.identity) out << " identity";
    out << "\n";
  }
  const std::string varNames = "defghijklmnstuvw";
  for (OrbitId o = 0; o < static_cast<OrbitId>(P.orbits.size()); ++o) {
    const auto& sym = P.symmetry[static_cast<std::size_t>(o)];
    if (sym.is_trivial()) continue;
    for (const auto& p : sym.perms) {
      bool isId = true;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != static_cast<int>(i)) isId = false;
      if (isId) continue;
      out << "norm " << P.orbit(o).name << "(";
      for (std::size_t i = 0; i < p.size(); ++i) out << (i ? "," : "") << varNames[i];
      out << ") = " << P.orbit(o).name << "(";
      for (std::size_t i = 0; i < p.size(); ++i)
        out << (i ? "," : "") << varNames[static_cast<std::size_t>(p[i])];
      out << ")\n";
    }
  }
  for (const auto& [key, res] : P.products) {
    if (key.left == P.identity || key.right == P.identity) continue;
    out << "prod " << P.orbit(key.left).name << "(";
    for (int i = 0; i < P.arity(key.left); ++i) out << (i ? "," : "") << (i + 1);
    out << ") " << P.orbit(key.right).name << "(";
    for (std::size_t i = 0; i < key.rightValues.size(); ++i)
      out << (i ? "," : "") << key.rightValues[i];
    out << ") = " << P.term_str(res) << "\n";
  }
  if (h) {
    for (const auto& [tag, img] : h->images) {
      out << "letter " << tag << " = " << P.orbit(img.orbit).name << "(" << (img.usesValue ? "d" : "")
          << ")\n";
    }
  }
  if (accepting && !accepting->empty()) {
    out << "accept";
    for (const auto& n : *accepting) out << " " << n;
    out << "\n";
  }
  return out.str();
}

}  // namespace dml

#endif

#ifndef DML_COMPILE_HPP
#define DML_COMPILE_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dml/fixtures.hpp"
#include "dml/io.hpp"
#include "dml/monoid_builder.hpp"
#include "dml/morphism.hpp"
#include "dml/rigidity.hpp"

namespace dml {

// A compiled (sub)formula: an orbit-finite data monoid presentation, a
// morphism over the expanded alphabet A x {0,1}^m, and its accepting orbits.
struct CompiledLanguage {
  std::shared_ptr<const Presentation> pres;
  Morphism morphism;
  std::set<std::string> accepting;       // orbit names
  std::vector<std::string> freeVars;     // track names, sorted
  std::vector<Tag> baseTags;

  Recognizer recognizer() const {
    Recognizer r;
    r.morphism = morphism;
    r.accepting = accepting;
    return r;
  }

  bool member(const AnnotatedWord& aw) const {
    return dml::member(recognizer(), expand(aw));
  }
};

struct CompileOptions {
  bool quotientStages = true;   // shrink after each stage via syntactic_quotient
  bool checkGrammar = true;     // require rigid-guardedness up front
  std::size_t projectabilityLen = 3;  // bounded projectability guard inside stages
  DataValue projectabilityVals = 2;
  MsoLimits msoLimits;          // for the exact rigidity checks
};

namespace detail {

inline std::vector<std::vector<bool>> all_bit_vectors(std::size_t m) {
  std::vector<std::vector<bool>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<bool> bits(m);
    for (std::size_t i = 0; i < m; ++i) bits[i] = (mask >> i) & 1u;
    out.push_back(bits);
  }
  return out;
}

inline std::vector<Tag> expanded_tags(const std::vector<Tag>& base, std::size_t m) {
  std::vector<Tag> out;
  for (const Tag& a : base)
    for (const auto& bits : all_bit_vectors(m)) out.push_back(encode_tag(a, bits));
  return out;
}

// ---------------------------------------------------------------------------
// Atom presentations via transition monoids of small complete DFAs over the
// expanded alphabet.

struct AtomDfa {
  int states = 0;
  int initial = 0;
  std::set<int> finals;
  // delta(state, base tag, bits) -> state; must be total
  std::function<int(int, const Tag&, const std::vector<bool>&)> delta;
};

struct TransitionMonoidCon {
  using Elem = std::vector<int>;  // state -> state

  const AtomDfa* dfa;
  std::vector<Tag> baseTags;
  std::size_t tracks;

  Elem identity() const {
    Elem e(static_cast<std::size_t>(dfa->states));
    std::iota(e.begin(), e.end(), 0);
    return e;
  }
  Elem multiply(const Elem& a, const Elem& b) const {
    Elem c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      c[i] = b[static_cast<std::size_t>(a[i])];
    return c;
  }
  Elem rename(const Renaming&, const Elem& e) const { return e; }
  std::vector<DataValue> values(const Elem&) const { return {}; }
  std::string key(const Elem& e) const {
    std::string s;
    for (int v : e) s += std::to_string(v) + ",";
    return s;
  }
  bool accepting(const Elem& e) const {
    return dfa->finals.count(e[static_cast<std::size_t>(dfa->initial)]) > 0;
  }
  std::vector<std::pair<Tag, Elem>> letter_images(DataValue) const {
    std::vector<std::pair<Tag, Elem>> out;
    for (const Tag& a : baseTags)
      for (const auto& bits : all_bit_vectors(tracks)) {
        Elem e(static_cast<std::size_t>(dfa->states));
        for (int s = 0; s < dfa->states; ++s) e[static_cast<std::size_t>(s)] = dfa->delta(s, a, bits);
        out.emplace_back(encode_tag(a, bits), e);
      }
    return out;
  }
};

inline CompiledLanguage from_atom_dfa(const AtomDfa& dfa, const std::vector<Tag>& baseTags,
                                      std::vector<std::string> vars, const std::string& name) {
  TransitionMonoidCon con{&dfa, baseTags, vars.size()};
  PresentationExtractor<TransitionMonoidCon> ex(con);
  auto res = ex.run(name);
  CompiledLanguage c;
  c.pres = res.presentation;
  c.morphism = res.morphism;
  c.morphism.target = c.pres;
  c.accepting = res.accepting;
  c.freeVars = std::move(vars);
  c.baseTags = baseTags;
  return c;
}

}  // namespace detail

enum class AtomKind { Less, Eq, Succ, First, Last, TagIs, In, True, False, Singleton };

// Hand-built recognizers for the atomic formulas; vars lists the affected
// track names in atom order (e.g. {x, y} for x < y).
inline CompiledLanguage compile_atom(AtomKind kind, const std::vector<Tag>& baseTags,
                                     std::vector<std::string> atomVars, const Tag& tagArg = "") {
  std::vector<std::string> vars = atomVars;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  auto trackOf = [&](const std::string& v) {
    return static_cast<std::size_t>(
        std::find(vars.begin(), vars.end(), v) - vars.begin());
  };

  detail::AtomDfa d;
  const int kDead = 0;
  switch (kind) {
    case AtomKind::True:
    case AtomKind::False: {
      d.states = 1;
      d.initial = 0;
      if (kind == AtomKind::True) d.finals = {0};
      d.delta = [](int s, const Tag&, const std::vector<bool>&) { return s; };
      break;
    }
    case AtomKind::Less:
    case AtomKind::Succ: {
      bool succ = kind == AtomKind::Succ;
      std::size_t xi = trackOf(atomVars[0]), yi = trackOf(atomVars[1]);
      d.states = 4;  // 0 dead, 1 start, 2 saw x, 3 saw both
      d.initial = 1;
      d.finals = {3};
      d.delta = [=](int s, const Tag&, const std::vector<bool>& bits) {
        bool x = bits[xi], y = bits[yi];
        if (s == kDead) return kDead;
        if (s == 1) return x && !y ? 2 : (!x && !y ? 1 : kDead);
        if (s == 2) {
          if (!x && y) return 3;
          if (!x && !y) return succ ? kDead : 2;
          return kDead;
        }
        return !x && !y ? 3 : kDead;
      };
      break;
    }
    case AtomKind::Eq: {
      std::size_t xi = trackOf(atomVars[0]), yi = trackOf(atomVars[1]);
      d.states = 3;  // 0 dead, 1 start, 2 saw both together
      d.initial = 1;
      d.finals = {2};
      d.delta = [=](int s, const Tag&, const std::vector<bool>& bits) {
        bool x = bits[xi], y = bits[yi];
        if (s == kDead) return kDead;
        if (s == 1) return x && y ? 2 : (!x && !y ? 1 : kDead);
        return !x && !y ? 2 : kDead;
      };
      break;
    }
    case AtomKind::First: {
      std::size_t xi = trackOf(atomVars[0]);
      d.states = 3;  // 0 dead, 1 start, 2 marked at the first position
      d.initial = 1;
      d.finals = {2};
      d.delta = [=](int s, const Tag&, const std::vector<bool>& bits) {
        bool x = bits[xi];
        if (s == kDead) return kDead;
        if (s == 1) return x ? 2 : kDead;
        return x ? kDead : 2;
      };
      break;
    }
    case AtomKind::Last: {
      std::size_t xi = trackOf(atomVars[0]);
      d.states = 3;  // 0 dead, 1 no mark yet, 2 mark just read
      d.initial = 1;
      d.finals = {2};
      d.delta = [=](int s, const Tag&, const std::vector<bool>& bits) {
        bool x = bits[xi];
        if (s == kDead) return kDead;
        if (s == 1) return x ? 2 : 1;
        return kDead;  // anything after the mark disqualifies it as last
      };
      break;
    }
    case AtomKind::TagIs:
    case AtomKind::Singleton: {
      std::size_t xi = trackOf(atomVars[0]);
      Tag want = tagArg;
      bool checkTag = kind == AtomKind::TagIs;
      d.states = 3;  // 0 dead, 1 unmarked, 2 marked once
      d.initial = 1;
      d.finals = {2};
      d.delta = [=](int s, const Tag& tag, const std::vector<bool>& bits) {
        bool x = bits[xi];
        if (s == kDead) return kDead;
        if (s == 1) {
          if (!x) return 1;
          return (!checkTag || tag == want) ? 2 : kDead;
        }
        return x ? kDead : 2;
      };
      break;
    }
    case AtomKind::In: {
      std::size_t xi = trackOf(atomVars[0]), yi = trackOf(atomVars[1]);
      d.states = 3;
      d.initial = 1;
      d.finals = {2};
      d.delta = [=](int s, const Tag&, const std::vector<bool>& bits) {
        bool x = bits[xi], y = bits[yi];
        if (s == kDead) return kDead;
        if (s == 1) return x ? (y ? 2 : kDead) : 1;
        return x ? kDead : 2;
      };
      break;
    }
  }
  return detail::from_atom_dfa(d, baseTags, vars, "atom");
}

// ---------------------------------------------------------------------------
// Cylindrification: extend the morphism over additional dummy tracks.

inline CompiledLanguage cylindrify(const CompiledLanguage& c, std::vector<std::string> vars) {
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  for (const auto& v : c.freeVars)
    if (std::find(vars.begin(), vars.end(), v) == vars.end())
      throw DmlError("cylindrify: target variable list drops '" + v + "'");
  if (vars == c.freeVars) return c;
  std::vector<int> where;  // position of each old track in the new list
  for (const auto& v : c.freeVars)
    where.push_back(static_cast<int>(std::find(vars.begin(), vars.end(), v) - vars.begin()));
  CompiledLanguage out = c;
  out.freeVars = vars;
  out.morphism.images.clear();
  for (const Tag& a : c.baseTags) {
    for (const auto& bits : detail::all_bit_vectors(vars.size())) {
      std::vector<bool> old(c.freeVars.size());
      for (std::size_t i = 0; i < old.size(); ++i) old[i] = bits[static_cast<std::size_t>(where[i])];
      out.morphism.images[encode_tag(a, bits)] =
          c.morphism.images.at(encode_tag(a, old));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Booleans.

namespace detail {

struct PairCon {
  using Elem = std::pair<Term, Term>;
  const Presentation* P1;
  const Presentation* P2;
  const Morphism* h1;
  const Morphism* h2;
  const std::set<std::string>* F1;
  const std::set<std::string>* F2;
  bool disjunction = false;

  Elem identity() const { return {P1->identity_term(), P2->identity_term()}; }
  Elem multiply(const Elem& a, const Elem& b) const {
    return {P1->product(a.first, b.first), P2->product(a.second, b.second)};
  }
  Elem rename(const Renaming& t, const Elem& e) const {
    return {P1->normalize(act_term(t, e.first)), P2->normalize(act_term(t, e.second))};
  }
  std::vector<DataValue> values(const Elem& e) const {
    std::vector<DataValue> out;
    auto add = [&](DataValue v) {
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    };
    for (DataValue v : e.first.values) add(v);
    for (DataValue v : e.second.values) add(v);
    return out;
  }
  std::string key(const Elem& e) const {
    return P1->term_str(e.first) + "|" + P2->term_str(e.second);
  }
  bool accepting(const Elem& e) const {
    bool a = F1->count(P1->orbit(e.first.orbit).name) > 0;
    bool b = F2->count(P2->orbit(e.second.orbit).name) > 0;
    return disjunction ? (a || b) : (a && b);
  }
  std::vector<std::pair<Tag, Elem>> letter_images(DataValue d) const {
    std::vector<std::pair<Tag, Elem>> out;
    for (const Tag& t : h1->tags()) out.emplace_back(t, Elem{h1->image(d, t), h2->image(d, t)});
    return out;
  }
};

}  // namespace detail

enum class BoolOp { And, Or, Not };

inline CompiledLanguage combine(BoolOp op, const CompiledLanguage& lhs,
                                const CompiledLanguage* rhs = nullptr) {
  if (op == BoolOp::Not) {
    CompiledLanguage out = lhs;
    std::set<std::string> flipped;
    for (const auto& o : lhs.pres->orbits)
      if (!lhs.accepting.count(o.name)) flipped.insert(o.name);
    out.accepting = flipped;
    return out;
  }
  if (!rhs) throw DmlError("combine: binary operation requires two operands");
  if (lhs.freeVars != rhs->freeVars || lhs.baseTags != rhs->baseTags)
    throw DmlError("combine: operands must be cylindrified to a common variable list");
  detail::PairCon con{lhs.pres.get(), rhs->pres.get(), &lhs.morphism, &rhs->morphism,
                      &lhs.accepting, &rhs->accepting, op == BoolOp::Or};
  PresentationExtractor<detail::PairCon> ex(con);
  auto res = ex.run("bool");
  CompiledLanguage out;
  out.pres = res.presentation;
  out.morphism = res.morphism;
  out.morphism.target = out.pres;
  out.accepting = res.accepting;
  out.freeVars = lhs.freeVars;
  out.baseTags = lhs.baseTags;
  return out;
}

// ---------------------------------------------------------------------------
// Powerset construction for existential quantification.

struct PowersetProduct {
  std::vector<Term> set;
  bool collapsed = false;  // the orbit-distinctness condition failed
};

// The product rule on powerset elements: S.T when products are consistent
// on orbits, the empty set otherwise.
inline PowersetProduct powerset_product(const Presentation& P, const std::vector<Term>& S,
                                        const std::vector<Term>& T) {
  PowersetProduct out;
  std::map<Term, Term> byOrbit;  // canonical orbit rep -> element
  for (const Term& s : S)
    for (const Term& t : T) {
      Term p = P.product(s, t);
      Term key = canonical_element(P, p);
      auto [it, fresh] = byOrbit.emplace(key, p);
      if (!fresh && !(it->second == p)) {
        out.collapsed = true;
        out.set.clear();
        return out;
      }
    }
  for (auto& [k, t] : byOrbit) out.set.push_back(t);
  std::sort(out.set.begin(), out.set.end());
  return out;
}

namespace detail {

struct SetCon {
  using Elem = std::vector<Term>;  // sorted normal forms, pairwise orbit-distinct
  const Presentation* P;
  const Morphism* h;
  const std::set<std::string>* F;
  std::size_t trackIdx = 0;       // quantified track within the input vars
  std::vector<Tag> baseTags;
  std::size_t outTracks = 0;      // number of remaining tracks

  Elem identity() const { return {P->identity_term()}; }

  Elem multiply(const Elem& a, const Elem& b) const {
    PowersetProduct p = powerset_product(*P, a, b);
    if (p.collapsed)
      throw DmlError(
          "projectability-violation: the powerset product collapsed on reachable elements");
    return p.set;
  }

  Elem rename(const Renaming& t, const Elem& e) const {
    Elem out;
    for (const Term& s : e) out.push_back(P->normalize(act_term(t, s)));
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<DataValue> values(const Elem& e) const {
    std::vector<DataValue> out;
    for (const Term& s : e)
      for (DataValue v : s.values)
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    return out;
  }

  std::string key(const Elem& e) const {
    std::string s = "{";
    for (const Term& t : e) s += P->term_str(t) + ";";
    return s + "}";
  }

  bool accepting(const Elem& e) const {
    for (const Term& t : e)
      if (F->count(P->orbit(t.orbit).name)) return true;
    return false;
  }

  std::vector<std::pair<Tag, Elem>> letter_images(DataValue d) const {
    std::vector<std::pair<Tag, Elem>> out;
    for (const Tag& a : baseTags) {
      for (const auto& bits : all_bit_vectors(outTracks)) {
        Elem e;
        for (bool quantBit : {false, true}) {
          std::vector<bool> full(bits);
          full.insert(full.begin() + static_cast<std::ptrdiff_t>(trackIdx), quantBit);
          Term img = h->image(d, encode_tag(a, full));
          Term norm = P->normalize(img);
          if (std::find(e.begin(), e.end(), norm) == e.end()) e.push_back(norm);
        }
        if (e.size() == 2 &&
            canonical_element(*P, e[0]) == canonical_element(*P, e[1]))
          throw DmlError("projectability-violation: letter images are orbit-equal but distinct");
        std::sort(e.begin(), e.end());
        out.emplace_back(encode_tag(a, bits), e);
      }
    }
    return out;
  }
};

}  // namespace detail

inline CompiledLanguage powerset_exists(const CompiledLanguage& c, const std::string& var) {
  auto it = std::find(c.freeVars.begin(), c.freeVars.end(), var);
  if (it == c.freeVars.end()) throw DmlError("powerset_exists: unknown variable '" + var + "'");
  std::size_t trackIdx = static_cast<std::size_t>(it - c.freeVars.begin());
  std::vector<std::string> outVars = c.freeVars;
  outVars.erase(outVars.begin() + static_cast<std::ptrdiff_t>(trackIdx));

  detail::SetCon con{c.pres.get(), &c.morphism, &c.accepting,
                     trackIdx,     c.baseTags,  outVars.size()};
  PresentationExtractor<detail::SetCon> ex(con);
  auto res = ex.run("pow");
  CompiledLanguage out;
  out.pres = res.presentation;
  out.morphism = res.morphism;
  out.morphism.target = out.pres;
  out.accepting = res.accepting;
  out.freeVars = outVars;
  out.baseTags = c.baseTags;
  return out;
}

// ---------------------------------------------------------------------------
// Guarded data tests: restrict to the image, quotient by the unextendable
// ideal to become 0-reduced, then take the 0-collapse product with the x~y
// monoid.

namespace detail {

// Stage 2 element: a term of the restricted presentation, or the null class.
struct QuotGCon {
  using Elem = std::optional<Term>;  // nullopt is the collapsed ideal
  const Presentation* P;
  const Morphism* h;
  const std::set<std::string>* F;
  const std::set<OrbitId>* ideal;

  Elem collapse(const Term& t) const {
    if (ideal->count(t.orbit)) return std::nullopt;
    return t;
  }
  Elem identity() const { return collapse(P->identity_term()); }
  Elem multiply(const Elem& a, const Elem& b) const {
    if (!a || !b) return std::nullopt;
    return collapse(P->product(*a, *b));
  }
  Elem rename(const Renaming& t, const Elem& e) const {
    if (!e) return std::nullopt;
    return P->normalize(act_term(t, *e));
  }
  std::vector<DataValue> values(const Elem& e) const {
    if (!e) return {};
    return e->values;
  }
  std::string key(const Elem& e) const { return e ? P->term_str(*e) : "0"; }
  bool accepting(const Elem& e) const {
    return e && F->count(P->orbit(e->orbit).name) > 0;
  }
  std::vector<std::pair<Tag, Elem>> letter_images(DataValue d) const {
    std::vector<std::pair<Tag, Elem>> out;
    for (const Tag& t : h->tags()) out.emplace_back(t, collapse(h->image(d, t)));
    return out;
  }
};

// Stage 3 element: a pair (guard element, x~y element) with 0-collapse.
struct CollapseCon {
  using Elem = std::pair<Term, Term>;
  const Presentation* P1;
  const Presentation* M2;
  const Morphism* h1;
  const std::set<std::string>* F1;
  std::optional<OrbitId> null1;  // P1's null orbit, when reachable
  OrbitId m2o, m2p, m2q, m2r, m2s;
  std::size_t xTrack = 0, yTrack = 0;  // track indices within the 2-var alphabet
  std::vector<Tag> baseTags;
  bool neq = false;

  bool is_null1(const Term& t) const { return null1 && t.orbit == *null1; }

  Elem make(Term a, Term b) const {
    if (is_null1(a)) return {std::move(a), Term{m2s, {}}};
    return {std::move(a), std::move(b)};
  }
  Elem identity() const { return make(P1->identity_term(), Term{m2o, {}}); }
  Elem multiply(const Elem& a, const Elem& b) const {
    Term t1 = P1->product(a.first, b.first);
    if (is_null1(t1)) return {t1, Term{m2s, {}}};
    return {t1, M2->product(a.second, b.second)};
  }
  Elem rename(const Renaming& t, const Elem& e) const {
    return {P1->normalize(act_term(t, e.first)), M2->normalize(act_term(t, e.second))};
  }
  std::vector<DataValue> values(const Elem& e) const {
    std::vector<DataValue> out;
    auto add = [&](DataValue v) {
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    };
    for (DataValue v : e.first.values) add(v);
    for (DataValue v : e.second.values) add(v);
    return out;
  }
  std::string key(const Elem& e) const {
    return P1->term_str(e.first) + "|" + M2->term_str(e.second);
  }
  bool accepting(const Elem& e) const {
    if (!F1->count(P1->orbit(e.first.orbit).name)) return false;
    return e.second.orbit == (neq ? m2s : m2r);
  }
  std::vector<std::pair<Tag, Elem>> letter_images(DataValue d) const {
    std::vector<std::pair<Tag, Elem>> out;
    for (const Tag& a : baseTags) {
      for (const auto& bits : all_bit_vectors(2)) {
        bool xBit = bits[xTrack], yBit = bits[yTrack];
        Term m2img = xBit ? (yBit ? Term{m2r, {}} : Term{m2p, {d}})
                          : (yBit ? Term{m2q, {d}} : Term{m2o, {}});
        out.emplace_back(encode_tag(a, bits), make(h1->image(d, encode_tag(a, bits)), m2img));
      }
    }
    return out;
  }
};

}  // namespace detail

// Builds the five-element x~y syntactic monoid fixture.
inline std::shared_ptr<Presentation> xsim_monoid() {
  return load_monoid_text(fixtures::kXsim).presentation;
}

// Stages 1-2 of the guarded-test construction: image restriction plus the
// ideal quotient. Returns the 0-reduced language and its null orbit name
// (absent when the ideal is unreachable).
struct ReducedGuard {
  CompiledLanguage lang;
  std::optional<std::string> nullOrbit;
};

inline ReducedGuard guarded_test_reduced(const CompiledLanguage& guard, const std::string& xVar,
                                         const std::string& yVar) {
  if (guard.freeVars.size() != 2)
    throw DmlError("guarded_test: the guard must have exactly two free variables");

  // Stage 0/1: enforce singleton marks and restrict to the image submonoid
  // (the conjunction re-extracts, which materializes reachable orbits only).
  CompiledLanguage sxc =
      cylindrify(compile_atom(AtomKind::Singleton, guard.baseTags, {xVar}), guard.freeVars);
  CompiledLanguage syc =
      cylindrify(compile_atom(AtomKind::Singleton, guard.baseTags, {yVar}), guard.freeVars);
  CompiledLanguage marks = combine(BoolOp::And, sxc, &syc);
  CompiledLanguage g = combine(BoolOp::And, guard, &marks);

  // Stage 2: collapse the ideal of elements that no context extends into the
  // accepted set; the quotient morphism is 0-reduced when the guard is rigid.
  std::set<OrbitId> extendable;
  {
    const Presentation& P = *g.pres;
    std::vector<Term> full = P.enumerate_restriction(P.support_values());
    for (OrbitId o = 0; o < static_cast<OrbitId>(P.orbits.size()); ++o)
      if (g.accepting.count(P.orbit(o).name)) extendable.insert(o);
    bool grew = true;
    while (grew) {
      grew = false;
      for (const Term& t : full) {
        if (extendable.count(t.orbit)) continue;
        bool ok = false;
        for (const Term& u : full) {
          if (extendable.count(P.product(t, u).orbit) ||
              extendable.count(P.product(u, t).orbit)) {
            ok = true;
            break;
          }
        }
        if (ok) {
          extendable.insert(t.orbit);
          grew = true;
        }
      }
    }
  }
  std::set<OrbitId> ideal;
  for (OrbitId o = 0; o < static_cast<OrbitId>(g.pres->orbits.size()); ++o)
    if (!extendable.count(o)) ideal.insert(o);

  detail::QuotGCon qcon{g.pres.get(), &g.morphism, &g.accepting, &ideal};
  PresentationExtractor<detail::QuotGCon> qex(qcon);
  auto qres = qex.run("reduced");
  ReducedGuard red;
  red.lang.pres = qres.presentation;
  red.lang.morphism = qres.morphism;
  red.lang.morphism.target = red.lang.pres;
  red.lang.accepting = qres.accepting;
  red.lang.freeVars = guard.freeVars;
  red.lang.baseTags = guard.baseTags;
  if (auto it = qres.orbitOfKey.find("0"); it != qres.orbitOfKey.end())
    red.nullOrbit = red.lang.pres->orbit(it->second).name;
  return red;
}

inline CompiledLanguage guarded_test(const CompiledLanguage& guard, const std::string& xVar,
                                     const std::string& yVar, bool neq) {
  ReducedGuard red = guarded_test_reduced(guard, xVar, yVar);
  std::shared_ptr<const Presentation> P1 = red.lang.pres;
  Morphism h1 = red.lang.morphism;
  std::set<std::string> F1 = red.lang.accepting;
  std::optional<OrbitId> null1;
  if (red.nullOrbit) null1 = P1->orbit_id(*red.nullOrbit);

  // Stage 3: 0-collapse product with the x~y monoid.
  auto M2 = xsim_monoid();
  detail::CollapseCon ccon;
  ccon.P1 = P1.get();
  ccon.M2 = M2.get();
  ccon.h1 = &h1;
  ccon.F1 = &F1;
  ccon.null1 = null1;
  ccon.m2o = M2->orbit_id("o");
  ccon.m2p = M2->orbit_id("p");
  ccon.m2q = M2->orbit_id("q");
  ccon.m2r = M2->orbit_id("r");
  ccon.m2s = M2->orbit_id("s");
  ccon.xTrack = static_cast<std::size_t>(
      std::find(guard.freeVars.begin(), guard.freeVars.end(), xVar) - guard.freeVars.begin());
  ccon.yTrack = static_cast<std::size_t>(
      std::find(guard.freeVars.begin(), guard.freeVars.end(), yVar) - guard.freeVars.begin());
  ccon.baseTags = guard.baseTags;
  ccon.neq = neq;
  PresentationExtractor<detail::CollapseCon> cex(ccon);
  auto cres = cex.run("test");
  CompiledLanguage out;
  out.pres = cres.presentation;
  out.morphism = cres.morphism;
  out.morphism.target = out.pres;
  out.accepting = cres.accepting;
  out.freeVars = guard.freeVars;
  out.baseTags = guard.baseTags;
  return out;
}

// ---------------------------------------------------------------------------
// Bounded projectability check (Def. projectable, by enumeration).

struct ProjectabilityReport {
  bool ok = true;
  std::optional<std::pair<DataWord, std::pair<std::vector<std::set<std::size_t>>,
                                              std::vector<std::set<std::size_t>>>>>
      violation;
};

inline ProjectabilityReport check_projectable(const CompiledLanguage& c, std::size_t maxLen,
                                              DataValue maxVal) {
  ProjectabilityReport rep;
  const Presentation& P = *c.pres;
  std::size_t m = c.freeVars.size();
  auto bitVectors = detail::all_bit_vectors(m);

  // The image sets {h<w,U..> : all annotations U..} are computed by a
  // frontier walk: annotation prefixes with equal images merge, so the
  // frontier stays bounded by the finite restriction rather than by 2^(mn).
  using Annotation = std::vector<std::set<std::size_t>>;
  using Frontier = std::map<Term, Annotation>;

  std::function<void(DataWord&, const Frontier&)> rec = [&](DataWord& w, const Frontier& frontier) {
    if (!rep.ok) return;
    // orbit-equal images must be equal
    std::map<Term, std::pair<Term, const Annotation*>> byOrbit;
    for (const auto& [e, ann] : frontier) {
      Term key = canonical_element(P, e);
      auto [it, fresh] = byOrbit.emplace(key, std::make_pair(e, &ann));
      if (!fresh && !(it->second.first == e)) {
        rep.ok = false;
        rep.violation = {w, {*it->second.second, ann}};
        return;
      }
    }
    if (w.size() == maxLen) return;
    std::size_t pos = w.size() + 1;
    for (const Tag& t : c.baseTags) {
      for (DataValue d = 1; d <= maxVal; ++d) {
        Frontier next;
        for (const auto& [e, ann] : frontier) {
          for (const auto& bits : bitVectors) {
            Term e2 = P.product(e, c.morphism.image(d, encode_tag(t, bits)));
            auto it = next.find(e2);
            if (it == next.end()) {
              Annotation a2 = ann;
              for (std::size_t i = 0; i < m; ++i)
                if (bits[i]) a2[i].insert(pos);
              next.emplace(e2, std::move(a2));
            }
          }
        }
        w.letters.push_back({d, t});
        rec(w, next);
        w.letters.pop_back();
        if (!rep.ok) return;
      }
    }
  };
  DataWord w;
  Frontier init;
  init.emplace(P.identity_term(), Annotation(m));
  rec(w, init);
  return rep;
}

// ---------------------------------------------------------------------------
// The full pipeline.

struct CompileStageInfo {
  std::string what;
  std::size_t orbits = 0;
};

struct CompileResult {
  CompiledLanguage lang;
  std::vector<CompileStageInfo> stages;
  std::vector<CompiledLanguage> stageLangs;  // one entry per stage, in order
};

namespace detail {

struct Compiler {
  std::vector<Tag> baseTags;
  CompileOptions opts;
  std::vector<CompileStageInfo>* stages;
  std::vector<CompiledLanguage>* stageLangs = nullptr;

  CompiledLanguage shrink(CompiledLanguage c, const std::string& what) {
    if (opts.quotientStages) {
      QuotientResult q = syntactic_quotient(c.recognizer(), "q");
      CompiledLanguage quo;
      quo.pres = q.recognizer.morphism.target;
      quo.morphism = q.recognizer.morphism;
      quo.accepting = q.recognizer.accepting;
      quo.freeVars = c.freeVars;
      quo.baseTags = c.baseTags;
      c = quo;
    }
    if (stages) stages->push_back({what, c.pres->orbits.size()});
    if (stageLangs) stageLangs->push_back(c);
    return c;
  }

  CompiledLanguage compile(const FormulaPtr& f) {
    using K = NodeKind;
    switch (f->kind) {
      case K::True:
        return compile_atom(AtomKind::True, baseTags, {});
      case K::False:
        return compile_atom(AtomKind::False, baseTags, {});
      case K::Less:
        return shrink(compile_atom(AtomKind::Less, baseTags, {f->v1, f->v2}), "atom<");
      case K::Eq:
        if (f->v1 == f->v2)
          return shrink(compile_atom(AtomKind::Singleton, baseTags, {f->v1}), "atom=");
        return shrink(compile_atom(AtomKind::Eq, baseTags, {f->v1, f->v2}), "atom=");
      case K::Succ:
        return shrink(compile_atom(AtomKind::Succ, baseTags, {f->v1, f->v2}), "atom+1");
      case K::First:
        return shrink(compile_atom(AtomKind::First, baseTags, {f->v1}), "atom-first");
      case K::Last:
        return shrink(compile_atom(AtomKind::Last, baseTags, {f->v1}), "atom-last");
      case K::TagAtom:
        return shrink(compile_atom(AtomKind::TagIs, baseTags, {f->v1}, f->tag), "atom-tag");
      case K::In:
        return shrink(compile_atom(AtomKind::In, baseTags, {f->v1, f->v2}), "atom-in");
      case K::Not:
        return combine(BoolOp::Not, compile(f->a));
      case K::And:
      case K::Or: {
        CompiledLanguage a = compile(f->a);
        CompiledLanguage b = compile(f->b);
        std::vector<std::string> vars = a.freeVars;
        vars.insert(vars.end(), b.freeVars.begin(), b.freeVars.end());
        std::sort(vars.begin(), vars.end());
        vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
        CompiledLanguage ac = cylindrify(a, vars);
        CompiledLanguage bc = cylindrify(b, vars);
        return shrink(combine(f->kind == K::And ? BoolOp::And : BoolOp::Or, ac, &bc),
                      f->kind == K::And ? "and" : "or");
      }
      case K::Implies:
        return compile(mk::lor(mk::lnot(f->a), f->b));
      case K::Iff:
        return compile(mk::land(mk::implies(f->a, f->b), mk::implies(f->b, f->a)));
      case K::ExistsFO:
      case K::ForallFO: {
        bool ex = f->kind == K::ExistsFO;
        FormulaPtr body = ex ? f->a : mk::lnot(f->a);
        CompiledLanguage c = compile(body);
        // enforce the singleton reading of the first-order variable
        std::vector<std::string> vars = c.freeVars;
        if (std::find(vars.begin(), vars.end(), f->v1) == vars.end()) vars.push_back(f->v1);
        std::sort(vars.begin(), vars.end());
        CompiledLanguage sing = cylindrify(
            compile_atom(AtomKind::Singleton, baseTags, {f->v1}), vars);
        CompiledLanguage cc = cylindrify(c, vars);
        CompiledLanguage conj = shrink(combine(BoolOp::And, cc, &sing), "fo-singleton");
        CompiledLanguage projected = shrink(powerset_exists(conj, f->v1), "exists");
        return ex ? projected : combine(BoolOp::Not, projected);
      }
      case K::ExistsSO:
      case K::ForallSO: {
        bool ex = f->kind == K::ExistsSO;
        FormulaPtr body = ex ? f->a : mk::lnot(f->a);
        CompiledLanguage c = compile(body);
        if (std::find(c.freeVars.begin(), c.freeVars.end(), f->v1) == c.freeVars.end()) {
          std::vector<std::string> vars = c.freeVars;
          vars.push_back(f->v1);
          std::sort(vars.begin(), vars.end());
          c = cylindrify(c, vars);
        }
        CompiledLanguage projected = shrink(powerset_exists(c, f->v1), "exists-so");
        return ex ? projected : combine(BoolOp::Not, projected);
      }
      case K::RigidTest: {
        CompiledLanguage g = compile(f->a);
        std::vector<std::string> vars = {f->v1, f->v2};
        std::sort(vars.begin(), vars.end());
        g = cylindrify(g, vars);
        return shrink(guarded_test(g, f->v1, f->v2, f->neq), "guarded-test");
      }
      case K::SemiRigidTest:
        throw DmlError("compile: semi-rigid tests are not compilable to data monoids");
      case K::RawTest:
        throw DmlError("compile: unguarded data test");
    }
    throw DmlError("compile: unhandled node");
  }
};

}  // namespace detail

inline CompileResult compile(const FormulaPtr& phi, const std::vector<Tag>& baseTags,
                             const CompileOptions& opts = {}) {
  if (opts.checkGrammar) {
    GrammarConfig cfg;
    cfg.tags = baseTags;
    cfg.limits = opts.msoLimits;
    if (check_grammar(phi, cfg) != GrammarVerdict::RigidGuarded)
      throw DmlError("compile: the formula is not rigidly guarded");
  }
  CompileResult res;
  detail::Compiler comp{baseTags, opts, &res.stages, &res.stageLangs};
  res.lang = comp.compile(phi);
  return res;
}

}  // namespace dml

#endif

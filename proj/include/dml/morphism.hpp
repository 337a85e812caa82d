#ifndef DML_MORPHISM_HPP
#define DML_MORPHISM_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dml/monoid_builder.hpp"
#include "dml/morphism_types.hpp"
#include "dml/presentation.hpp"

namespace dml {

// ---------------------------------------------------------------------------
// Annotated words <w, U_1..U_m> and the expanded-alphabet encoding. A track
// bit vector is folded into the tag as `a[01...]`; m = 0 keeps the bare tag.

struct AnnotatedWord {
  DataWord word;
  std::vector<std::set<std::size_t>> predicates;  // 1-based positions
};

inline Tag encode_tag(const Tag& base, const std::vector<bool>& bits) {
  if (bits.empty()) return base;
  std::string s = base + "[";
  for (bool b : bits) s += b ? '1' : '0';
  return s + "]";
}

inline std::pair<Tag, std::vector<bool>> decode_tag(const Tag& tag) {
  auto lb = tag.find('[');
  if (lb == std::string::npos || tag.back() != ']') return {tag, {}};
  std::vector<bool> bits;
  for (std::size_t i = lb + 1; i + 1 < tag.size(); ++i) bits.push_back(tag[i] == '1');
  return {tag.substr(0, lb), bits};
}

inline DataWord expand(const AnnotatedWord& aw) {
  DataWord out;
  for (std::size_t pos = 1; pos <= aw.word.size(); ++pos) {
    std::vector<bool> bits;
    for (const auto& U : aw.predicates) bits.push_back(U.count(pos) > 0);
    out.letters.push_back({aw.word.at(pos).value, encode_tag(aw.word.at(pos).tag, bits)});
  }
  return out;
}

// ---------------------------------------------------------------------------

inline Term evaluate(const Morphism& h, const DataWord& w) {
  const Presentation& P = *h.target;
  Term acc = P.identity_term();
  for (const Letter& l : w.letters) acc = P.product(acc, h.image(l.value, l.tag));
  return acc;
}

inline bool member(const Recognizer& R, const DataWord& w) {
  return R.accepts_orbit(evaluate(R.morphism, w).orbit);
}

// Orbit-level closure: smallest set of canonical elements containing the
// identity and closed under right multiplication with letter images, where
// the letter value ranges over the element's memory plus one fresh value.
inline std::vector<Term> reachable_orbits(const Morphism& h) {
  const Presentation& P = *h.target;
  std::set<Term> seen;
  std::vector<Term> todo;
  Term start = canonical_element(P, P.identity_term());
  seen.insert(start);
  todo.push_back(start);
  while (!todo.empty()) {
    Term s = todo.back();
    todo.pop_back();
    std::vector<DataValue> cases = s.values;
    DataValue fresh = 1;
    for (DataValue v : s.values) fresh = std::max(fresh, v + 1);
    cases.push_back(fresh);
    for (const Tag& tag : h.tags()) {
      for (DataValue d : cases) {
        Term next = canonical_element(P, P.product(s, h.image(d, tag)));
        if (seen.insert(next).second) todo.push_back(next);
      }
    }
  }
  return std::vector<Term>(seen.begin(), seen.end());
}

inline bool is_empty(const Recognizer& R) {
  for (const Term& t : reachable_orbits(R.morphism))
    if (R.accepts_orbit(t.orbit)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Syntactic quotient: the two-sided Myhill-Nerode congruence over the
// reachable restriction, computed by signature refinement with letter-image
// generators, then re-presented through the extractor.

namespace detail {

struct SyntacticPartition {
  std::vector<Term> elems;              // normal forms over the support
  std::map<Term, int> classOf;          // element -> class id
  std::vector<Term> minMember;          // class id -> least member
  std::vector<bool> classAccepting;
};

inline SyntacticPartition syntactic_partition(const Recognizer& R) {
  const Presentation& P = *R.morphism.target;

  // Reachable orbits, then every instance over the support.
  std::set<OrbitId> reach;
  for (const Term& t : reachable_orbits(R.morphism)) reach.insert(t.orbit);
  std::vector<Term> elems;
  for (const Term& t : P.enumerate_restriction(P.support_values()))
    if (reach.count(t.orbit)) elems.push_back(t);

  std::vector<Term> gens;
  for (const Tag& tag : R.morphism.tags())
    for (DataValue d = 1; d <= P.support; ++d) gens.push_back(R.morphism.image(d, tag));

  std::map<Term, int> cls;
  for (const Term& t : elems) cls[t] = R.accepts_orbit(t.orbit) ? 1 : 0;

  // Each signature embeds the current class, so every round refines the
  // partition; the fixpoint is reached when the class count stops growing.
  while (true) {
    std::map<std::vector<int>, int> sigIds;
    std::map<Term, int> next;
    for (const Term& t : elems) {
      std::vector<int> sig;
      sig.push_back(cls.at(t));
      for (const Term& g : gens) {
        sig.push_back(cls.at(P.product(t, g)));
        sig.push_back(cls.at(P.product(g, t)));
      }
      auto [it, fresh] = sigIds.emplace(sig, static_cast<int>(sigIds.size()));
      next[t] = it->second;
    }
    std::set<int> oldIds;
    for (auto& [k, v] : cls) oldIds.insert(v);
    if (sigIds.size() == oldIds.size()) break;
    cls = std::move(next);
  }

  SyntacticPartition part;
  part.elems = elems;
  // Renumber classes by least member for determinism.
  std::map<int, Term> least;
  for (const Term& t : elems) {
    auto it = least.find(cls.at(t));
    if (it == least.end() || t < it->second) least.insert_or_assign(cls.at(t), t);
  }
  std::vector<std::pair<Term, int>> ordered;
  for (auto& [old, t] : least) ordered.emplace_back(t, old);
  std::sort(ordered.begin(), ordered.end());
  std::map<int, int> renum;
  for (std::size_t i = 0; i < ordered.size(); ++i) renum[ordered[i].second] = static_cast<int>(i);
  part.minMember.resize(ordered.size());
  part.classAccepting.assign(ordered.size(), false);
  for (std::size_t i = 0; i < ordered.size(); ++i) part.minMember[i] = ordered[i].first;
  for (const Term& t : elems) {
    int c = renum.at(cls.at(t));
    part.classOf[t] = c;
    if (R.accepts_orbit(t.orbit)) part.classAccepting[static_cast<std::size_t>(c)] = true;
  }
  return part;
}

// Extractor construction over congruence classes. Elements are class ids;
// the least member stands in for the class.
struct QuotientCon {
  using Elem = int;
  const Presentation* P;
  const Morphism* h;
  const SyntacticPartition* part;

  int class_of(const Term& t) const {
    auto it = part->classOf.find(P->normalize(t));
    if (it == part->classOf.end()) throw DmlError("quotient: element escaped the restriction");
    return it->second;
  }

  Elem identity() const { return class_of(P->identity_term()); }

  Elem multiply(const Elem& a, const Elem& b) const {
    return class_of(P->product(part->minMember[static_cast<std::size_t>(a)],
                               part->minMember[static_cast<std::size_t>(b)]));
  }

  Elem rename(const Renaming& t, const Elem& a) const {
    return class_of(act_term(t, part->minMember[static_cast<std::size_t>(a)]));
  }

  // Memory of the class via the stabilizer criterion, probed with a fresh
  // support value; ordered by first occurrence in the least member.
  std::vector<DataValue> values(const Elem& a) const {
    const Term& m = part->minMember[static_cast<std::size_t>(a)];
    std::vector<DataValue> out;
    for (DataValue v : m.values) {
      DataValue fresh = 0;
      for (DataValue c = 1; c <= P->support; ++c) {
        if (std::find(m.values.begin(), m.values.end(), c) == m.values.end()) {
          fresh = c;
          break;
        }
      }
      if (fresh == 0) throw DmlError("quotient: no fresh support value for a memory probe");
      if (class_of(act_term(Renaming::swap(v, fresh), m)) != a) out.push_back(v);
    }
    return out;
  }

  std::string key(const Elem& a) const {
    return P->term_str(part->minMember[static_cast<std::size_t>(a)]);
  }

  bool accepting(const Elem& a) const { return part->classAccepting[static_cast<std::size_t>(a)]; }

  std::vector<std::pair<Tag, Elem>> letter_images(DataValue d) const {
    std::vector<std::pair<Tag, Elem>> out;
    for (const Tag& tag : h->tags()) out.emplace_back(tag, class_of(h->image(d, tag)));
    return out;
  }
};

}  // namespace detail

struct QuotientResult {
  Recognizer recognizer;
  std::size_t classCount = 0;
};

inline QuotientResult syntactic_quotient(const Recognizer& R, const std::string& name = "quotient") {
  detail::SyntacticPartition part = detail::syntactic_partition(R);
  detail::QuotientCon con{R.morphism.target.get(), &R.morphism, &part};
  PresentationExtractor<detail::QuotientCon> ex(con);
  auto res = ex.run(name);
  QuotientResult out;
  out.recognizer.morphism = res.morphism;
  out.recognizer.accepting = res.accepting;
  out.classCount = part.minMember.size();
  return out;
}

}  // namespace dml

#endif

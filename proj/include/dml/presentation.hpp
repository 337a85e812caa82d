#ifndef DML_PRESENTATION_HPP
#define DML_PRESENTATION_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dml/nominal.hpp"

namespace dml {

using OrbitId = int;

struct OrbitName {
  std::string name;
  int arity = 0;
};

// One element representative: an orbit name applied to pairwise-distinct
// data values.
struct Term {
  OrbitId orbit = -1;
  std::vector<DataValue> values;

  bool operator==(const Term& o) const { return orbit == o.orbit && values == o.values; }
  bool operator<(const Term& o) const {
    if (orbit != o.orbit) return orbit < o.orbit;
    return values < o.values;
  }
};

inline Term act_term(const Renaming& t, const Term& s) {
  Term r = s;
  for (auto& v : r.values) v = t(v);
  return r;
}

// Position permutations under which a term is ~-equivalent to itself; the
// normal form picks the lexicographically least value tuple in the class.
struct OrbitSymmetry {
  // Each perm p has length arity; position i of the normal form reads
  // values[p[i]].
  std::vector<std::vector<int>> perms;  // always contains the identity

  static OrbitSymmetry trivial(int arity) {
    OrbitSymmetry s;
    std::vector<int> id(arity);
    std::iota(id.begin(), id.end(), 0);
    s.perms.push_back(id);
    return s;
  }

  bool is_trivial() const { return perms.size() <= 1; }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// minimal_pair result: (sigma(s), sigma(u), sigma) with sigma(s) = o(1..k)
// and fresh values of sigma(u) numbered k+1, k+2, ... in order of appearance.
struct MinimalPair {
  Term left;
  Term right;
  Renaming sigma;
};

class Presentation {
public:
  std::string name;
  std::vector<OrbitName> orbits;
  std::vector<OrbitSymmetry> symmetry;  // parallel to orbits
  OrbitId identity = -1;
  DataValue support = 0;  // support set C = {1..support}

  // Product table keyed on minimal pairs: (left orbit, right orbit, right
  // value tuple). The left tuple is implicitly (1..arity).
  struct PairKey {
    OrbitId left;
    OrbitId right;
    std::vector<DataValue> rightValues;
    bool operator<(const PairKey& o) const {
      if (left != o.left) return left < o.left;
      if (right != o.right) return right < o.right;
      return rightValues < o.rightValues;
    }
  };
  std::map<PairKey, Term> products;

  OrbitId orbit_id(const std::string& n) const {
    for (std::size_t i = 0; i < orbits.size(); ++i)
      if (orbits[i].name == n) return static_cast<OrbitId>(i);
    return -1;
  }

  const OrbitName& orbit(OrbitId id) const { return orbits.at(static_cast<std::size_t>(id)); }

  int arity(OrbitId id) const { return orbit(id).arity; }

  Term identity_term() const { return Term{identity, {}}; }

  Term make_term(const std::string& orbitName, std::vector<DataValue> vals) const {
    OrbitId id = orbit_id(orbitName);
    if (id < 0) throw DmlError("unknown orbit '" + orbitName + "'");
    return check_term(Term{id, std::move(vals)});
  }

  Term check_term(Term t) const {
    if (t.orbit < 0 || t.orbit >= static_cast<OrbitId>(orbits.size()))
      throw DmlError("term with unknown orbit id");
    if (static_cast<int>(t.values.size()) != arity(t.orbit))
      throw DmlError("term arity mismatch for orbit '" + orbit(t.orbit).name + "'");
    std::set<DataValue> s(t.values.begin(), t.values.end());
    if (s.size() != t.values.size()) throw DmlError("term values not pairwise distinct");
    for (DataValue v : t.values)
      if (v == 0) throw DmlError("term value 0 is reserved");
    return t;
  }

  // ~-normal form via the orbit's symmetry group.
  Term normalize(const Term& t) const {
    const OrbitSymmetry& sym = symmetry.at(static_cast<std::size_t>(t.orbit));
    if (sym.is_trivial()) return t;
    Term best = t;
    for (const auto& p : sym.perms) {
      Term cand = t;
      for (std::size_t i = 0; i < p.size(); ++i) cand.values[i] = t.values[static_cast<std::size_t>(p[i])];
      if (cand.values < best.values) best = cand;
    }
    return best;
  }

  std::string term_str(const Term& t) const {
    std::string s = orbit(t.orbit).name + "(";
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(t.values[i]);
    }
    return s + ")";
  }

  friend MinimalPair minimal_pair(const Term& s, const Term& u);

  Term product(const Term& s, const Term& u) const {
    check_term(s);
    check_term(u);
    MinimalPair mp = minimal_pair_of(s, u);
    DataValue maxv = 0;
    for (DataValue v : mp.left.values) maxv = std::max(maxv, v);
    for (DataValue v : mp.right.values) maxv = std::max(maxv, v);
    if (maxv > support)
      throw DmlError("support-overflow: product of " + term_str(s) + " and " + term_str(u) +
                     " needs " + std::to_string(maxv) + " values but support is " +
                     std::to_string(support));
    PairKey key{mp.left.orbit, mp.right.orbit, mp.right.values};
    auto it = products.find(key);
    if (it == products.end())
      throw DmlError("table-incomplete: no product for minimal pair " + term_str(mp.left) + " * " +
                     term_str(mp.right));
    Term r = act_term(invert(mp.sigma), it->second);
    std::set<DataValue> distinct(r.values.begin(), r.values.end());
    if (distinct.size() != r.values.size())
      throw DmlError("invalid presentation: product result collapses values (non-reduced table)");
    return normalize(r);
  }

  static MinimalPair minimal_pair_of(const Term& s, const Term& u) {
    std::map<DataValue, DataValue> inj;
    DataValue next = 1;
    for (DataValue v : s.values) inj[v] = next++;
    for (DataValue v : u.values)
      if (!inj.count(v)) inj[v] = next++;
    Renaming sigma = Renaming::extend_injection(inj);
    return MinimalPair{act_term(sigma, s), act_term(sigma, u), sigma};
  }

  // All normal-form terms with values drawn from the given set.
  std::vector<Term> enumerate_restriction(const std::vector<DataValue>& valueSet) const {
    std::vector<Term> out;
    std::set<Term> seen;
    for (OrbitId o = 0; o < static_cast<OrbitId>(orbits.size()); ++o) {
      int k = arity(o);
      std::vector<DataValue> tuple;
      enumerate_tuples(valueSet, k, tuple, [&](const std::vector<DataValue>& vals) {
        Term t = normalize(Term{o, vals});
        if (seen.insert(t).second) out.push_back(t);
      });
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<DataValue> support_values() const {
    std::vector<DataValue> v(support);
    std::iota(v.begin(), v.end(), 1);
    return v;
  }

  int max_arity() const {
    int m = 0;
    for (const auto& o : orbits) m = std::max(m, o.arity);
    return m;
  }

  ValidationReport validate() const;

private:
  template <typename F>
  static void enumerate_tuples(const std::vector<DataValue>& pool, int k,
                               std::vector<DataValue>& tuple, F&& f) {
    if (static_cast<int>(tuple.size()) == k) {
      f(tuple);
      return;
    }
    for (DataValue v : pool) {
      if (std::find(tuple.begin(), tuple.end(), v) != tuple.end()) continue;
      tuple.push_back(v);
      enumerate_tuples(pool, k, tuple, f);
      tuple.pop_back();
    }
  }
};

inline MinimalPair minimal_pair(const Term& s, const Term& u) {
  return Presentation::minimal_pair_of(s, u);
}

namespace detail {

// All permutations of {1..c} as renamings (small c only).
inline std::vector<Renaming> support_renamings(DataValue c) {
  std::vector<DataValue> perm(c);
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<Renaming> out;
  do {
    std::map<DataValue, DataValue> m;
    for (DataValue i = 1; i <= c; ++i) m[i] = perm[i - 1];
    out.push_back(Renaming::extend_injection(m));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace detail

// Memory of an element via the stabilizer criterion: a value is memorable
// iff swapping it with a fresh value changes the normal form. Presentations
// are required to be reduced, so this must coincide with the term's values.
inline std::set<DataValue> term_memory(const Presentation& P, const Term& t) {
  Term n = P.normalize(t);
  std::set<DataValue> mem;
  DataValue fresh = P.support + 1;
  for (DataValue v : n.values) fresh = std::max(fresh, v + 1);
  for (DataValue v : n.values) {
    Term swapped = P.normalize(act_term(Renaming::swap(v, fresh), n));
    if (!(swapped == n)) mem.insert(v);
  }
  return mem;
}

inline ValidationReport Presentation::validate() const {
  ValidationReport rep;
  auto complain = [&](const std::string& msg) {
    if (rep.violations.size() < 200) rep.violations.push_back(msg);
  };

  if (identity < 0 || identity >= static_cast<OrbitId>(orbits.size())) {
    complain("no identity orbit");
    return rep;
  }
  if (arity(identity) != 0) complain("identity orbit must have arity 0");
  if (support < static_cast<DataValue>(2 * max_arity()))
    complain("support smaller than 2*max_arity");

  // Table completeness: every minimal pair over the support has an entry,
  // and every entry is in minimal-pair form with result values covered by
  // the arguments.
  for (OrbitId a = 0; a < static_cast<OrbitId>(orbits.size()); ++a) {
    for (OrbitId b = 0; b < static_cast<OrbitId>(orbits.size()); ++b) {
      int k = arity(a), h = arity(b);
      if (static_cast<DataValue>(k + h) > support) {
        complain("support cannot hold a minimal pair of orbits " + orbit(a).name + ", " +
                 orbit(b).name);
        continue;
      }
      std::vector<DataValue> tuple;
      std::function<void()> rec = [&]() {
        if (static_cast<int>(tuple.size()) == h) {
          PairKey key{a, b, tuple};
          auto it = products.find(key);
          if (it == products.end()) {
            complain("table-incomplete: missing " + orbit(a).name + "(1..k) * " + orbit(b).name +
                     " tuple");
            return;
          }
          std::set<DataValue> allowed;
          for (DataValue v = 1; v <= static_cast<DataValue>(k); ++v) allowed.insert(v);
          for (DataValue v : tuple) allowed.insert(v);
          for (DataValue v : it->second.values)
            if (!allowed.count(v))
              complain("table result " + term_str(it->second) + " uses value outside arguments");
          return;
        }
        DataValue nextFresh = static_cast<DataValue>(k) + 1;
        for (DataValue v : tuple)
          if (v > static_cast<DataValue>(k)) nextFresh = std::max(nextFresh, v + 1);
        for (DataValue v = 1; v <= static_cast<DataValue>(k); ++v) {
          if (std::find(tuple.begin(), tuple.end(), v) != tuple.end()) continue;
          tuple.push_back(v);
          rec();
          tuple.pop_back();
        }
        tuple.push_back(nextFresh);
        rec();
        tuple.pop_back();
      };
      rec();
    }
  }
  if (!rep.ok()) return rep;  // laws below assume a complete table

  std::vector<Term> all = enumerate_restriction(support_values());

  // Identity law.
  for (const Term& t : all) {
    if (!(product(identity_term(), t) == t)) complain("identity law fails on " + term_str(t));
    if (!(product(t, identity_term()) == t)) complain("identity law fails on " + term_str(t));
  }

  // Reducedness: memory of every normal form equals its values.
  for (const Term& t : all) {
    std::set<DataValue> mem = term_memory(*this, t);
    std::set<DataValue> vals(t.values.begin(), t.values.end());
    if (mem != vals) complain("reducedness-violation: " + term_str(t) + " has non-memorable values");
  }

  // Equivariance over all renamings of the support.
  std::vector<Renaming> taus = detail::support_renamings(support);
  for (const Term& s : all) {
    for (const Term& u : all) {
      Term su = product(s, u);
      for (const Renaming& tau : taus) {
        Term lhs = product(normalize(act_term(tau, s)), normalize(act_term(tau, u)));
        Term rhs = normalize(act_term(tau, su));
        if (!(lhs == rhs)) {
          complain("equivariance fails on " + term_str(s) + " * " + term_str(u));
          break;
        }
      }
    }
  }

  // Associativity after normalization.
  for (const Term& s : all)
    for (const Term& u : all)
      for (const Term& v : all) {
        Term a = product(product(s, u), v);
        Term b = product(s, product(u, v));
        if (!(a == b)) {
          complain("associativity fails on " + term_str(s) + ", " + term_str(u) + ", " +
                   term_str(v));
          if (rep.violations.size() >= 200) return rep;
        }
      }

  return rep;
}

// Canonical orbit representative of an element: the least normal form over
// all bijections of its values onto {1..k}.
inline Term canonical_element(const Presentation& P, const Term& t) {
  Term n = P.normalize(t);
  std::vector<DataValue> vals = n.values;
  std::sort(vals.begin(), vals.end());
  std::vector<DataValue> target(vals.size());
  std::iota(target.begin(), target.end(), 1);
  if (vals.empty()) return n;
  std::vector<std::size_t> idx(vals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::optional<Term> best;
  do {
    std::map<DataValue, DataValue> m;
    for (std::size_t i = 0; i < vals.size(); ++i) m[vals[i]] = target[idx[i]];
    Term cand = P.normalize(act_term(Renaming::extend_injection(m), n));
    if (!best || cand < *best) best = cand;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return *best;
}

}  // namespace dml

#endif

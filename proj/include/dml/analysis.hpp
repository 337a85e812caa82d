#ifndef DML_ANALYSIS_HPP
#define DML_ANALYSIS_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dml/presentation.hpp"

namespace dml {

// Green's relation summary over a finite restriction. Preorders are boolean
// matrices indexed like `elements`; divisibility witnesses are searched over
// the full support restriction.
struct GreenSummary {
  std::vector<Term> elements;
  std::vector<std::vector<bool>> r_order, l_order, j_order;          // leq[i][j] : i <= j
  std::vector<std::vector<bool>> r_orbit, l_orbit, j_orbit;          // orbit-lifted preorders
  std::vector<int> r_class, l_class, j_class, h_class;               // class ids
  std::vector<std::vector<int>> r_classes, l_classes, j_classes, h_classes;
  std::map<std::pair<std::string, std::string>, bool> orbit_j_order;  // orbit name pairs

  int index_of(const Term& t) const {
    for (std::size_t i = 0; i < elements.size(); ++i)
      if (elements[i] == t) return static_cast<int>(i);
    return -1;
  }
};

struct MemoryReport {
  Term element;
  std::set<DataValue> mem, mem_r, mem_l;
};

struct PropertyReport {
  bool mem_union_ok = true;
  bool stairs_ok = true;
  std::vector<std::string> failures;
  std::vector<std::size_t> h_class_sizes;
  bool ok() const { return mem_union_ok && stairs_ok; }
};

// Memory of an element; the term's values cross-checked against the
// stabilizer criterion. Disagreement means the presentation is not reduced.
inline std::set<DataValue> memory(const Presentation& P, const Term& s) {
  Term n = P.normalize(s);
  std::set<DataValue> fromTerm(n.values.begin(), n.values.end());
  std::set<DataValue> fromStabilizer = term_memory(P, n);
  if (fromTerm != fromStabilizer)
    throw DmlError("reducedness-violation: memory of " + P.term_str(n) +
                   " differs from its term values");
  return fromTerm;
}

inline bool is_aperiodic(const Presentation& P) {
  auto all = P.enumerate_restriction(P.support_values());
  std::size_t bound = all.size() + 1;
  for (const Term& s : all) {
    Term power = s;
    bool stabilized = false;
    for (std::size_t n = 1; n <= bound; ++n) {
      Term next = P.product(power, s);  // s^(n+1)
      if (next == power) {
        stabilized = true;
        break;
      }
      power = next;
    }
    if (!stabilized) return false;
  }
  return true;
}

namespace detail {

// All renamings moving the values of t injectively into {1..support},
// completed canonically to permutations.
inline std::vector<Term> orbit_instances_over_support(const Presentation& P, const Term& t) {
  std::vector<DataValue> vals = P.normalize(t).values;
  std::vector<Term> out;
  std::set<Term> seen;
  std::vector<DataValue> pool = P.support_values();
  std::vector<DataValue> tuple;
  std::function<void()> rec = [&]() {
    if (tuple.size() == vals.size()) {
      std::map<DataValue, DataValue> m;
      for (std::size_t i = 0; i < vals.size(); ++i) m[vals[i]] = tuple[i];
      Term inst = P.normalize(act_term(Renaming::extend_injection(m), t));
      if (seen.insert(inst).second) out.push_back(inst);
      return;
    }
    for (DataValue v : pool) {
      if (std::find(tuple.begin(), tuple.end(), v) != tuple.end()) continue;
      tuple.push_back(v);
      rec();
      tuple.pop_back();
    }
  };
  rec();
  return out;
}

inline std::vector<std::vector<int>> classes_of(const std::vector<int>& classIds) {
  int n = 0;
  for (int c : classIds) n = std::max(n, c + 1);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < classIds.size(); ++i)
    out[static_cast<std::size_t>(classIds[i])].push_back(static_cast<int>(i));
  return out;
}

inline std::vector<int> equiv_classes(const std::vector<std::vector<bool>>& leq) {
  std::size_t n = leq.size();
  std::vector<int> cls(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] >= 0) continue;
    cls[i] = next;
    for (std::size_t j = i + 1; j < n; ++j)
      if (leq[i][j] && leq[j][i]) cls[j] = next;
    ++next;
  }
  return cls;
}

}  // namespace detail

inline GreenSummary green(const Presentation& P, const std::vector<DataValue>& C2) {
  for (DataValue v : C2)
    if (v == 0 || v > P.support) throw DmlError("green: C2 must be inside the support");

  GreenSummary g;
  g.elements = P.enumerate_restriction(C2);
  std::vector<Term> full = P.enumerate_restriction(P.support_values());
  std::size_t n = g.elements.size();

  auto leqR = [&](const Term& s, const Term& t) {
    for (const Term& u : full)
      if (P.product(t, u) == s) return true;
    return false;
  };
  auto leqL = [&](const Term& s, const Term& t) {
    for (const Term& u : full)
      if (P.product(u, t) == s) return true;
    return false;
  };
  auto leqJ = [&](const Term& s, const Term& t) {
    for (const Term& u : full) {
      Term ut = P.product(u, t);
      for (const Term& v : full)
        if (P.product(ut, v) == s) return true;
    }
    return false;
  };

  auto fill = [&](auto&& rel, std::vector<std::vector<bool>>& mat) {
    mat.assign(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) mat[i][j] = rel(g.elements[i], g.elements[j]);
  };
  fill(leqR, g.r_order);
  fill(leqL, g.l_order);
  fill(leqJ, g.j_order);

  // Orbit-lifted preorders: quantify over renamings of the second argument's
  // memory into the support.
  auto fillOrbit = [&](auto&& rel, std::vector<std::vector<bool>>& mat) {
    mat.assign(n, std::vector<bool>(n, false));
    for (std::size_t j = 0; j < n; ++j) {
      auto insts = detail::orbit_instances_over_support(P, g.elements[j]);
      for (std::size_t i = 0; i < n; ++i)
        for (const Term& tj : insts)
          if (rel(g.elements[i], tj)) {
            mat[i][j] = true;
            break;
          }
    }
  };
  fillOrbit(leqR, g.r_orbit);
  fillOrbit(leqL, g.l_orbit);
  fillOrbit(leqJ, g.j_orbit);

  g.r_class = detail::equiv_classes(g.r_order);
  g.l_class = detail::equiv_classes(g.l_order);
  g.j_class = detail::equiv_classes(g.j_order);
  g.h_class.assign(n, -1);
  {
    std::map<std::pair<int, int>, int> hid;
    for (std::size_t i = 0; i < n; ++i) {
      auto key = std::make_pair(g.r_class[i], g.l_class[i]);
      auto [it, fresh] = hid.emplace(key, static_cast<int>(hid.size()));
      g.h_class[i] = it->second;
    }
  }
  g.r_classes = detail::classes_of(g.r_class);
  g.l_classes = detail::classes_of(g.l_class);
  g.j_classes = detail::classes_of(g.j_class);
  g.h_classes = detail::classes_of(g.h_class);

  // J preorder on orbit names, via canonical representatives.
  for (OrbitId a = 0; a < static_cast<OrbitId>(P.orbits.size()); ++a) {
    std::vector<DataValue> va(static_cast<std::size_t>(P.arity(a)));
    std::iota(va.begin(), va.end(), 1);
    Term ra = P.normalize(Term{a, va});
    for (OrbitId b = 0; b < static_cast<OrbitId>(P.orbits.size()); ++b) {
      std::vector<DataValue> vb(static_cast<std::size_t>(P.arity(b)));
      std::iota(vb.begin(), vb.end(), 1);
      Term rb = P.normalize(Term{b, vb});
      bool le = false;
      for (const Term& inst : detail::orbit_instances_over_support(P, rb))
        if (leqJ(ra, inst)) {
          le = true;
          break;
        }
      g.orbit_j_order[{P.orbit(a).name, P.orbit(b).name}] = le;
    }
  }
  return g;
}

inline MemoryReport mem_rl(const Presentation& P, const Term& s, const GreenSummary& g) {
  int i = g.index_of(P.normalize(s));
  if (i < 0) throw DmlError("mem_rl: element not in the summary");
  MemoryReport rep;
  rep.element = g.elements[static_cast<std::size_t>(i)];
  rep.mem = memory(P, rep.element);
  auto intersectOver = [&](const std::vector<int>& cls) {
    std::set<DataValue> acc;
    bool first = true;
    for (std::size_t j = 0; j < g.elements.size(); ++j) {
      if (cls[j] != cls[static_cast<std::size_t>(i)]) continue;
      std::set<DataValue> m = memory(P, g.elements[j]);
      if (first) {
        acc = m;
        first = false;
      } else {
        std::set<DataValue> out;
        std::set_intersection(acc.begin(), acc.end(), m.begin(), m.end(),
                              std::inserter(out, out.begin()));
        acc = out;
      }
    }
    return acc;
  };
  rep.mem_r = intersectOver(g.r_class);
  rep.mem_l = intersectOver(g.l_class);
  return rep;
}

inline PropertyReport check_structure(const Presentation& P, const GreenSummary& g) {
  PropertyReport rep;

  // (a) mem = mem_R union mem_L for every element.
  for (const Term& s : g.elements) {
    MemoryReport m = mem_rl(P, s, g);
    std::set<DataValue> uni;
    std::set_union(m.mem_r.begin(), m.mem_r.end(), m.mem_l.begin(), m.mem_l.end(),
                   std::inserter(uni, uni.begin()));
    if (uni != m.mem) {
      rep.mem_union_ok = false;
      rep.failures.push_back("mem != mem_R u mem_L for " + P.term_str(s));
    }
  }

  // (b) s =_{J-orbit} s*t implies s =_R s*t, and symmetrically for t and L.
  auto orbitJeq = [&](int i, int j) {
    return g.j_orbit[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
           g.j_orbit[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  };
  auto plainReq = [&](int i, int j) {
    return g.r_class[static_cast<std::size_t>(i)] == g.r_class[static_cast<std::size_t>(j)];
  };
  auto plainLeq = [&](int i, int j) {
    return g.l_class[static_cast<std::size_t>(i)] == g.l_class[static_cast<std::size_t>(j)];
  };
  for (std::size_t i = 0; i < g.elements.size(); ++i)
    for (std::size_t j = 0; j < g.elements.size(); ++j) {
      Term st = P.product(g.elements[i], g.elements[j]);
      int k = g.index_of(st);
      if (k < 0) continue;  // product left the C2 restriction; witnesses use the support
      if (orbitJeq(static_cast<int>(i), k) && !plainReq(static_cast<int>(i), k)) {
        rep.stairs_ok = false;
        rep.failures.push_back("stairs(R) fails for " + P.term_str(g.elements[i]) + ", " +
                               P.term_str(g.elements[j]));
      }
      if (orbitJeq(static_cast<int>(j), k) && !plainLeq(static_cast<int>(j), k)) {
        rep.stairs_ok = false;
        rep.failures.push_back("stairs(L) fails for " + P.term_str(g.elements[i]) + ", " +
                               P.term_str(g.elements[j]));
      }
    }

  for (const auto& h : g.h_classes) rep.h_class_sizes.push_back(h.size());
  return rep;
}

}  // namespace dml

#endif

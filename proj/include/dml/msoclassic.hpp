#ifndef DML_MSOCLASSIC_HPP
#define DML_MSOCLASSIC_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dml/logic.hpp"
#include "dml/nominal.hpp"

namespace dml {

// ---------------------------------------------------------------------------
// NFA over the alphabet Tags x {0,1}^tracks. Transitions carry cube
// predicates (tag set, care mask, bit values) so that the track count can
// grow without enumerating product alphabets.

struct CubePred {
  std::uint64_t tagMask = 0;
  std::uint64_t care = 0;
  std::uint64_t bits = 0;

  bool matches(int tagIdx, std::uint64_t letterBits) const {
    return ((tagMask >> tagIdx) & 1u) && ((letterBits & care) == (bits & care));
  }
};

inline std::optional<CubePred> cube_and(const CubePred& a, const CubePred& b) {
  CubePred c;
  c.tagMask = a.tagMask & b.tagMask;
  if (c.tagMask == 0) return std::nullopt;
  if ((a.bits ^ b.bits) & a.care & b.care) return std::nullopt;
  c.care = a.care | b.care;
  c.bits = (a.bits & a.care) | (b.bits & b.care);
  return c;
}

struct MsoLimits {
  std::size_t stateBudget = 200000;
};

struct Nfa {
  std::vector<Tag> tags;                 // base alphabet
  std::vector<std::string> tracks;       // named bit tracks, bit i = tracks[i]
  int nStates = 0;
  std::vector<std::vector<std::pair<CubePred, int>>> trans;
  std::set<int> initial, finals;

  std::uint64_t all_tags() const { return (std::uint64_t{1} << tags.size()) - 1; }

  int add_state() {
    trans.emplace_back();
    return nStates++;
  }

  void add_edge(int from, CubePred p, int to) { trans[static_cast<std::size_t>(from)].emplace_back(p, to); }

  int track_index(const std::string& name) const {
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i] == name) return static_cast<int>(i);
    return -1;
  }
};

namespace mso {

inline Nfa make(const std::vector<Tag>& tags, const std::vector<std::string>& tracks) {
  if (tracks.size() > 62) throw DmlError("too many live tracks (limit 62)");
  if (tags.size() > 62) throw DmlError("too many tags");
  Nfa a;
  a.tags = tags;
  a.tracks = tracks;
  return a;
}

// Remaps an automaton onto a superset track list.
inline Nfa align(const Nfa& a, const std::vector<std::string>& tracks) {
  if (a.tracks == tracks) return a;
  Nfa b = make(a.tags, tracks);
  std::vector<int> where(a.tracks.size());
  for (std::size_t i = 0; i < a.tracks.size(); ++i) {
    int j = -1;
    for (std::size_t k = 0; k < tracks.size(); ++k)
      if (tracks[k] == a.tracks[i]) j = static_cast<int>(k);
    if (j < 0) throw DmlError("align: target track list is not a superset");
    where[i] = j;
  }
  b.nStates = a.nStates;
  b.trans.resize(static_cast<std::size_t>(a.nStates));
  for (int s = 0; s < a.nStates; ++s)
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)]) {
      CubePred q;
      q.tagMask = p.tagMask;
      for (std::size_t i = 0; i < a.tracks.size(); ++i) {
        if ((p.care >> i) & 1u) {
          q.care |= std::uint64_t{1} << where[i];
          if ((p.bits >> i) & 1u) q.bits |= std::uint64_t{1} << where[i];
        }
      }
      b.trans[static_cast<std::size_t>(s)].emplace_back(q, t);
    }
  b.initial = a.initial;
  b.finals = a.finals;
  return b;
}

inline std::vector<std::string> track_union(const Nfa& a, const Nfa& b) {
  std::set<std::string> s(a.tracks.begin(), a.tracks.end());
  s.insert(b.tracks.begin(), b.tracks.end());
  return {s.begin(), s.end()};
}

inline Nfa intersect(const Nfa& a0, const Nfa& b0) {
  auto tracks = track_union(a0, b0);
  Nfa a = align(a0, tracks), b = align(b0, tracks);
  Nfa c = make(a.tags, tracks);
  std::map<std::pair<int, int>, int> id;
  std::deque<std::pair<int, int>> todo;
  auto get = [&](int x, int y) {
    auto [it, fresh] = id.emplace(std::make_pair(x, y), c.nStates);
    if (fresh) {
      c.add_state();
      todo.emplace_back(x, y);
    }
    return it->second;
  };
  for (int i : a.initial)
    for (int j : b.initial) c.initial.insert(get(i, j));
  while (!todo.empty()) {
    auto [x, y] = todo.front();
    todo.pop_front();
    int s = id.at({x, y});
    if (a.finals.count(x) && b.finals.count(y)) c.finals.insert(s);
    for (auto& [pa, ta] : a.trans[static_cast<std::size_t>(x)])
      for (auto& [pb, tb] : b.trans[static_cast<std::size_t>(y)])
        if (auto p = cube_and(pa, pb)) c.add_edge(s, *p, get(ta, tb));
  }
  return c;
}

inline Nfa unite(const Nfa& a0, const Nfa& b0) {
  auto tracks = track_union(a0, b0);
  Nfa a = align(a0, tracks), b = align(b0, tracks);
  Nfa c = make(a.tags, tracks);
  c.nStates = a.nStates + b.nStates;
  c.trans = a.trans;
  c.trans.resize(static_cast<std::size_t>(c.nStates));
  for (int s = 0; s < b.nStates; ++s)
    for (auto& [p, t] : b.trans[static_cast<std::size_t>(s)])
      c.trans[static_cast<std::size_t>(s + a.nStates)].emplace_back(p, t + a.nStates);
  c.initial = a.initial;
  for (int i : b.initial) c.initial.insert(i + a.nStates);
  c.finals = a.finals;
  for (int f : b.finals) c.finals.insert(f + a.nStates);
  return c;
}

inline void dedupe_edges(Nfa& a) {
  for (auto& edges : a.trans) {
    auto key = [](const std::pair<CubePred, int>& e) {
      return std::make_tuple(e.first.tagMask, e.first.care, e.first.bits & e.first.care,
                             e.second);
    };
    for (auto& e : edges) e.first.bits &= e.first.care;
    std::sort(edges.begin(), edges.end(),
              [&](const auto& x, const auto& y) { return key(x) < key(y); });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [&](const auto& x, const auto& y) { return key(x) == key(y); }),
                edges.end());
  }
}

// Existential projection of a track: the bit becomes unconstrained.
inline Nfa project(const Nfa& a, const std::string& track) {
  int idx = a.track_index(track);
  if (idx < 0) throw DmlError("project: unknown track '" + track + "'");
  std::vector<std::string> tracks = a.tracks;
  tracks.erase(tracks.begin() + idx);
  Nfa b = make(a.tags, tracks);
  b.nStates = a.nStates;
  b.trans.resize(static_cast<std::size_t>(a.nStates));
  std::uint64_t low = (std::uint64_t{1} << idx) - 1;
  for (int s = 0; s < a.nStates; ++s)
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)]) {
      CubePred q;
      q.tagMask = p.tagMask;
      q.care = (p.care & low) | ((p.care >> (idx + 1)) << idx);
      q.bits = (p.bits & low) | ((p.bits >> (idx + 1)) << idx);
      b.trans[static_cast<std::size_t>(s)].emplace_back(q, t);
    }
  b.initial = a.initial;
  b.finals = a.finals;
  dedupe_edges(b);
  return b;
}

// ---------------------------------------------------------------------------
// Determinization via local minterms: the outgoing cubes of a subset state
// split the letter space into disjoint regions.

namespace detail_mso {

struct Region {
  CubePred cube;  // a region is a single cube here
};

// Splits each region along p into the part inside p and the parts outside.
inline void split_regions(std::vector<CubePred>& regions, const CubePred& p) {
  std::vector<CubePred> out;
  for (const CubePred& r : regions) {
    auto inP = cube_and(r, p);
    // r \ p as disjoint cubes
    std::uint64_t tagOverlap = r.tagMask & p.tagMask;
    if (tagOverlap == 0) {
      out.push_back(r);
      continue;
    }
    if (r.tagMask & ~p.tagMask) {
      CubePred q = r;
      q.tagMask = r.tagMask & ~p.tagMask;
      out.push_back(q);
    }
    CubePred base = r;
    base.tagMask = tagOverlap;
    std::uint64_t newCare = p.care & ~r.care;
    if ((p.bits ^ base.bits) & p.care & r.care) {
      // disjoint on an already-cared bit: the whole base region is outside p
      out.push_back(base);
    } else {
      CubePred prefix = base;
      for (int i = 0; i < 62; ++i) {
        std::uint64_t bit = std::uint64_t{1} << i;
        if (!(newCare & bit)) continue;
        CubePred q = prefix;
        q.care |= bit;
        if (!(p.bits & bit)) q.bits |= bit;  // flipped value -> outside p
        out.push_back(q);
        prefix.care |= bit;
        prefix.bits = (prefix.bits & ~bit) | (p.bits & bit);
      }
      if (inP) out.push_back(*inP);
    }
  }
  regions = std::move(out);
}

}  // namespace detail_mso

inline Nfa determinize(const Nfa& a, const MsoLimits& limits = {}) {
  Nfa d = make(a.tags, a.tracks);
  std::map<std::set<int>, int> id;
  std::deque<std::set<int>> todo;
  auto get = [&](const std::set<int>& S) {
    auto [it, fresh] = id.emplace(S, d.nStates);
    if (fresh) {
      if (static_cast<std::size_t>(d.nStates) >= limits.stateBudget)
        throw DmlError("state-budget exceeded during determinization");
      d.add_state();
      todo.push_back(S);
    }
    return it->second;
  };
  auto cube_key = [](const CubePred& p) {
    return std::make_tuple(p.tagMask, p.care, p.bits & p.care);
  };
  // region partitions are shared across subset states with the same cubes
  std::map<std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>>,
           std::vector<CubePred>>
      regionCache;
  d.initial.insert(get(a.initial));
  while (!todo.empty()) {
    std::set<int> S = todo.front();
    todo.pop_front();
    int s = id.at(S);
    for (int q : S)
      if (a.finals.count(q)) {
        d.finals.insert(s);
        break;
      }
    // collect outgoing edges, grouping targets by distinct predicate
    std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>,
             std::pair<CubePred, std::set<int>>>
        byPred;
    for (int q : S)
      for (auto& [p, t] : a.trans[static_cast<std::size_t>(q)])
        byPred[cube_key(p)].first = p, byPred[cube_key(p)].second.insert(t);
    std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> predKeys;
    for (auto& [k, v] : byPred) predKeys.push_back(k);
    auto cacheIt = regionCache.find(predKeys);
    if (cacheIt == regionCache.end()) {
      std::vector<CubePred> regions{CubePred{a.all_tags(), 0, 0}};
      for (auto& [k, v] : byPred) detail_mso::split_regions(regions, v.first);
      cacheIt = regionCache.emplace(predKeys, std::move(regions)).first;
    }
    std::map<std::set<int>, CubePred> merged;  // first region per target subset
    for (const CubePred& r : cacheIt->second) {
      std::set<int> T;
      for (auto& [k, v] : byPred)
        if (cube_and(r, v.first)) T.insert(v.second.begin(), v.second.end());
      d.add_edge(s, r, get(T));  // includes the empty sink: completeness
    }
  }
  return d;
}

inline Nfa reverse(const Nfa& a) {
  Nfa b = make(a.tags, a.tracks);
  b.nStates = a.nStates;
  b.trans.resize(static_cast<std::size_t>(a.nStates));
  for (int s = 0; s < a.nStates; ++s)
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)])
      b.trans[static_cast<std::size_t>(t)].emplace_back(p, s);
  b.initial = a.finals;
  b.finals = a.initial;
  return b;
}

// Removes states that are unreachable or cannot reach a final state.
inline Nfa trim(const Nfa& a) {
  std::vector<bool> fwd(static_cast<std::size_t>(a.nStates), false);
  std::deque<int> q(a.initial.begin(), a.initial.end());
  for (int s : a.initial) fwd[static_cast<std::size_t>(s)] = true;
  while (!q.empty()) {
    int s = q.front();
    q.pop_front();
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)])
      if (!fwd[static_cast<std::size_t>(t)]) {
        fwd[static_cast<std::size_t>(t)] = true;
        q.push_back(t);
      }
  }
  std::vector<std::vector<int>> rev(static_cast<std::size_t>(a.nStates));
  for (int s = 0; s < a.nStates; ++s)
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)]) rev[static_cast<std::size_t>(t)].push_back(s);
  std::vector<bool> bwd(static_cast<std::size_t>(a.nStates), false);
  for (int s : a.finals) {
    if (bwd[static_cast<std::size_t>(s)]) continue;
    bwd[static_cast<std::size_t>(s)] = true;
    q.push_back(s);
  }
  while (!q.empty()) {
    int s = q.front();
    q.pop_front();
    for (int p : rev[static_cast<std::size_t>(s)])
      if (!bwd[static_cast<std::size_t>(p)]) {
        bwd[static_cast<std::size_t>(p)] = true;
        q.push_back(p);
      }
  }
  std::vector<int> remap(static_cast<std::size_t>(a.nStates), -1);
  Nfa b = make(a.tags, a.tracks);
  for (int s = 0; s < a.nStates; ++s)
    if (fwd[static_cast<std::size_t>(s)] && bwd[static_cast<std::size_t>(s)])
      remap[static_cast<std::size_t>(s)] = b.add_state();
  if (b.nStates == 0) {
    int s = b.add_state();
    b.initial = {s};
    return b;  // empty language
  }
  for (int s = 0; s < a.nStates; ++s) {
    if (remap[static_cast<std::size_t>(s)] < 0) continue;
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)])
      if (remap[static_cast<std::size_t>(t)] >= 0)
        b.add_edge(remap[static_cast<std::size_t>(s)], p, remap[static_cast<std::size_t>(t)]);
  }
  for (int s : a.initial)
    if (remap[static_cast<std::size_t>(s)] >= 0) b.initial.insert(remap[static_cast<std::size_t>(s)]);
  for (int s : a.finals)
    if (remap[static_cast<std::size_t>(s)] >= 0) b.finals.insert(remap[static_cast<std::size_t>(s)]);
  return b;
}

// Cheap sound state reduction: quotient by forward bisimulation (states with
// the same acceptance and the same (cube, class-of-target) signatures merge).
inline Nfa reduce(const Nfa& a0) {
  Nfa a = trim(a0);
  dedupe_edges(a);
  std::vector<int> cls(static_cast<std::size_t>(a.nStates), 0);
  for (int s : a.finals) cls[static_cast<std::size_t>(s)] = 1;
  while (true) {
    std::map<std::vector<std::uint64_t>, int> sigIds;
    std::vector<int> next(static_cast<std::size_t>(a.nStates));
    for (int s = 0; s < a.nStates; ++s) {
      std::set<std::vector<std::uint64_t>> parts;
      for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)])
        parts.insert({p.tagMask, p.care, p.bits & p.care,
                      static_cast<std::uint64_t>(cls[static_cast<std::size_t>(t)])});
      std::vector<std::uint64_t> sig{static_cast<std::uint64_t>(cls[static_cast<std::size_t>(s)])};
      for (auto& v : parts) sig.insert(sig.end(), v.begin(), v.end());
      auto [it, fresh] = sigIds.emplace(sig, static_cast<int>(sigIds.size()));
      next[static_cast<std::size_t>(s)] = it->second;
    }
    std::set<int> old(cls.begin(), cls.end());
    bool done = sigIds.size() == old.size();
    cls = std::move(next);
    if (done) break;
  }
  int nClasses = 0;
  for (int c : cls) nClasses = std::max(nClasses, c + 1);
  Nfa b = make(a.tags, a.tracks);
  b.nStates = nClasses;
  b.trans.resize(static_cast<std::size_t>(nClasses));
  for (int s = 0; s < a.nStates; ++s)
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)])
      b.trans[static_cast<std::size_t>(cls[static_cast<std::size_t>(s)])].emplace_back(
          p, cls[static_cast<std::size_t>(t)]);
  for (int s : a.initial) b.initial.insert(cls[static_cast<std::size_t>(s)]);
  for (int s : a.finals) b.finals.insert(cls[static_cast<std::size_t>(s)]);
  dedupe_edges(b);
  return b;
}

// Moore minimization of a complete DFA, refining over the global minterm
// regions of the automaton's distinct cubes.
inline Nfa moore_minimize(const Nfa& d) {
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, CubePred> cubes;
  for (int s = 0; s < d.nStates; ++s)
    for (auto& [p, t] : d.trans[static_cast<std::size_t>(s)])
      cubes.emplace(std::make_tuple(p.tagMask, p.care, p.bits & p.care), p);
  std::vector<CubePred> regions{CubePred{d.all_tags(), 0, 0}};
  for (auto& [k, p] : cubes) detail_mso::split_regions(regions, p);

  // per state and region, the unique successor (complete & deterministic)
  std::vector<std::vector<int>> table(static_cast<std::size_t>(d.nStates),
                                      std::vector<int>(regions.size(), -1));
  for (int s = 0; s < d.nStates; ++s)
    for (std::size_t r = 0; r < regions.size(); ++r)
      for (auto& [p, t] : d.trans[static_cast<std::size_t>(s)])
        if (cube_and(regions[r], p)) {
          table[static_cast<std::size_t>(s)][r] = t;
          break;
        }

  std::vector<int> cls(static_cast<std::size_t>(d.nStates), 0);
  for (int s : d.finals) cls[static_cast<std::size_t>(s)] = 1;
  while (true) {
    std::map<std::vector<int>, int> sigIds;
    std::vector<int> next(static_cast<std::size_t>(d.nStates));
    for (int s = 0; s < d.nStates; ++s) {
      std::vector<int> sig{cls[static_cast<std::size_t>(s)]};
      for (std::size_t r = 0; r < regions.size(); ++r) {
        int t = table[static_cast<std::size_t>(s)][r];
        sig.push_back(t < 0 ? -1 : cls[static_cast<std::size_t>(t)]);
      }
      auto [it, fresh] = sigIds.emplace(sig, static_cast<int>(sigIds.size()));
      next[static_cast<std::size_t>(s)] = it->second;
    }
    std::set<int> old(cls.begin(), cls.end());
    bool done = sigIds.size() == old.size();
    cls = std::move(next);
    if (done) break;
  }
  int nClasses = 0;
  for (int c : cls) nClasses = std::max(nClasses, c + 1);
  Nfa b = make(d.tags, d.tracks);
  b.nStates = nClasses;
  b.trans.resize(static_cast<std::size_t>(nClasses));
  std::vector<bool> emitted(static_cast<std::size_t>(nClasses), false);
  for (int s = 0; s < d.nStates; ++s) {
    int c = cls[static_cast<std::size_t>(s)];
    if (emitted[static_cast<std::size_t>(c)]) continue;
    emitted[static_cast<std::size_t>(c)] = true;
    for (auto& [p, t] : d.trans[static_cast<std::size_t>(s)])
      b.trans[static_cast<std::size_t>(c)].emplace_back(p, cls[static_cast<std::size_t>(t)]);
  }
  for (int s : d.initial) b.initial.insert(cls[static_cast<std::size_t>(s)]);
  for (int s : d.finals) b.finals.insert(cls[static_cast<std::size_t>(s)]);
  dedupe_edges(b);
  return b;
}

inline Nfa minimize(const Nfa& a, const MsoLimits& limits = {}) {
  (void)limits;
  return reduce(a);
}

inline Nfa complement(const Nfa& a, const MsoLimits& limits = {}) {
  // Flipping the finals of the Moore-minimal complete DFA yields the minimal
  // complete DFA of the complement.
  Nfa d = moore_minimize(determinize(reduce(a), limits));
  std::set<int> newFinals;
  for (int s = 0; s < d.nStates; ++s)
    if (!d.finals.count(s)) newFinals.insert(s);
  d.finals = newFinals;
  return trim(d);
}

// Deterministic, complete, Moore-minimal form (used before subset-heavy
// steps to keep the state space small).
inline Nfa to_min_dfa(const Nfa& a, const MsoLimits& limits = {}) {
  return moore_minimize(determinize(reduce(a), limits));
}

// ---------------------------------------------------------------------------
// Emptiness and shortest accepted word (BFS; ties broken by the smallest
// (tag, bits) letter).

struct AnnotatedLetter {
  int tagIdx = 0;
  std::uint64_t bits = 0;
};

inline std::optional<std::vector<AnnotatedLetter>> shortest_word(const Nfa& a) {
  std::map<int, std::pair<int, AnnotatedLetter>> parent;  // state -> (prev, letter)
  std::deque<int> q;
  for (int i : a.initial) {
    parent.emplace(i, std::make_pair(-1, AnnotatedLetter{}));
    q.push_back(i);
  }
  auto finish = [&](int f) {
    std::vector<AnnotatedLetter> w;
    for (int s = f; parent.at(s).first != -1; s = parent.at(s).first)
      w.push_back(parent.at(s).second);
    std::reverse(w.begin(), w.end());
    return w;
  };
  for (int i : a.initial)
    if (a.finals.count(i)) return finish(i);
  while (!q.empty()) {
    int s = q.front();
    q.pop_front();
    // deterministic exploration: smallest concrete letter per edge
    std::vector<std::pair<std::pair<int, std::uint64_t>, int>> options;
    for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)]) {
      int tag = 0;
      while (!((p.tagMask >> tag) & 1u)) ++tag;
      options.push_back({{tag, p.bits & p.care}, t});
    }
    std::sort(options.begin(), options.end());
    for (auto& [letter, t] : options) {
      if (parent.count(t)) continue;
      parent.emplace(t, std::make_pair(s, AnnotatedLetter{letter.first, letter.second}));
      if (a.finals.count(t)) return finish(t);
      q.push_back(t);
    }
  }
  return std::nullopt;
}

inline bool empty_language(const Nfa& a) { return !shortest_word(a).has_value(); }

inline bool accepts(const Nfa& a, const std::vector<AnnotatedLetter>& w) {
  std::set<int> cur = a.initial;
  for (const auto& l : w) {
    std::set<int> next;
    for (int s : cur)
      for (auto& [p, t] : a.trans[static_cast<std::size_t>(s)])
        if (p.matches(l.tagIdx, l.bits)) next.insert(t);
    cur = next;
    if (cur.empty()) return false;
  }
  for (int s : cur)
    if (a.finals.count(s)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Direct first-order position quantification. Given the complete minimal
// DFA D of the body over tracks + {x}, builds the deterministic automaton
// for "exists/forall a position p such that <w,{p}> is in L(D)". One run of
// D is spawned per position; runs whose outcome is already decided leave the
// pending set, which keeps the state space local.

inline Nfa quantify_position(const Nfa& dfaIn, const std::string& xTrack, bool existential,
                             const MsoLimits& limits = {}) {
  Nfa D = dfaIn;
  if (D.track_index(xTrack) < 0) {
    auto tracks = D.tracks;
    tracks.push_back(xTrack);
    std::sort(tracks.begin(), tracks.end());
    D = align(D, tracks);
  }
  int xi = D.track_index(xTrack);
  std::uint64_t xb = std::uint64_t{1} << xi;

  // Outcome classification per state: does every (resp. no) continuation
  // accept from here?
  std::vector<std::vector<int>> radj(static_cast<std::size_t>(D.nStates));
  for (int s = 0; s < D.nStates; ++s)
    for (auto& [p, t] : D.trans[static_cast<std::size_t>(s)]) radj[static_cast<std::size_t>(t)].push_back(s);
  std::vector<bool> canAccept(static_cast<std::size_t>(D.nStates), false);
  {
    std::deque<int> q(D.finals.begin(), D.finals.end());
    for (int s : D.finals) canAccept[static_cast<std::size_t>(s)] = true;
    while (!q.empty()) {
      int s = q.front();
      q.pop_front();
      for (int p : radj[static_cast<std::size_t>(s)])
        if (!canAccept[static_cast<std::size_t>(p)]) {
          canAccept[static_cast<std::size_t>(p)] = true;
          q.push_back(p);
        }
    }
  }
  std::vector<bool> canReject(static_cast<std::size_t>(D.nStates), false);
  {
    std::deque<int> q;
    for (int s = 0; s < D.nStates; ++s)
      if (!D.finals.count(s)) {
        canReject[static_cast<std::size_t>(s)] = true;
        q.push_back(s);
      }
    while (!q.empty()) {
      int s = q.front();
      q.pop_front();
      for (int p : radj[static_cast<std::size_t>(s)])
        if (!canReject[static_cast<std::size_t>(p)]) {
          canReject[static_cast<std::size_t>(p)] = true;
          q.push_back(p);
        }
    }
  }
  auto allAccepting = [&](int s) { return !canReject[static_cast<std::size_t>(s)]; };
  auto noneAccepting = [&](int s) { return !canAccept[static_cast<std::size_t>(s)]; };

  std::vector<std::string> outTracks = D.tracks;
  outTracks.erase(outTracks.begin() + xi);
  Nfa out = make(D.tags, outTracks);
  int sinkDecided = out.add_state();  // accept-sink (exists) / reject-sink (forall)
  out.add_edge(sinkDecided, CubePred{out.all_tags(), 0, 0}, sinkDecided);
  if (existential) out.finals.insert(sinkDecided);

  struct Key {
    int q0;
    std::vector<int> pending;
    bool operator<(const Key& o) const {
      if (q0 != o.q0) return q0 < o.q0;
      return pending < o.pending;
    }
  };
  if (D.initial.size() != 1) throw DmlError("quantify_position: body automaton is not a DFA");
  std::map<Key, int> id;
  std::deque<Key> todo;
  auto get = [&](Key k) {
    std::sort(k.pending.begin(), k.pending.end());
    k.pending.erase(std::unique(k.pending.begin(), k.pending.end()), k.pending.end());
    // drop decided runs; jump to the sink when a run's outcome decides the word
    std::vector<int> kept;
    for (int s : k.pending) {
      if (existential) {
        if (allAccepting(s)) return sinkDecided;
        if (noneAccepting(s)) continue;
      } else {
        if (noneAccepting(s)) return sinkDecided;
        if (allAccepting(s)) continue;
      }
      kept.push_back(s);
    }
    k.pending = std::move(kept);
    auto [it, fresh] = id.emplace(k, out.nStates);
    if (fresh) {
      if (static_cast<std::size_t>(out.nStates) >= limits.stateBudget)
        throw DmlError("state-budget exceeded during position quantification");
      out.add_state();
      todo.push_back(it->first);
    }
    return it->second;
  };

  auto step = [&](int s, const CubePred& rNoX, bool markHere) -> int {
    CubePred probe = rNoX;
    probe.care |= xb;
    if (markHere) probe.bits |= xb;
    for (auto& [p, t] : D.trans[static_cast<std::size_t>(s)])
      if (cube_and(probe, p)) return t;
    throw DmlError("quantify_position: body automaton is not complete");
  };

  // reindexes a cube over D's tracks (never caring about x) to out's tracks
  std::uint64_t lowMask = (std::uint64_t{1} << xi) - 1;
  auto drop_x_bit = [&](const CubePred& p) {
    CubePred q;
    q.tagMask = p.tagMask;
    q.care = (p.care & lowMask) | ((p.care >> (xi + 1)) << xi);
    q.bits = (p.bits & lowMask) | ((p.bits >> (xi + 1)) << xi);
    return q;
  };

  int start = get(Key{*D.initial.begin(), {}});
  out.initial.insert(start);
  std::set<int> processed;
  while (!todo.empty()) {
    Key k = todo.front();
    todo.pop_front();
    int s = id.at(k);
    if (processed.count(s)) continue;
    processed.insert(s);
    // acceptance at word end: the quantifier ranges over the spawned runs
    bool ok = !existential;
    for (int p : k.pending) {
      bool fin = D.finals.count(p) > 0;
      if (existential && fin) ok = true;
      if (!existential && !fin) ok = false;
    }
    if (ok) out.finals.insert(s);

    // regions over the letters, ignoring the x bit (it is driven explicitly)
    std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, CubePred> cubes;
    auto addCubes = [&](int st) {
      for (auto& [p, t] : D.trans[static_cast<std::size_t>(st)]) {
        CubePred q = p;
        q.care &= ~xb;
        q.bits &= ~xb;
        cubes.emplace(std::make_tuple(q.tagMask, q.care, q.bits & q.care), q);
      }
    };
    addCubes(k.q0);
    for (int p : k.pending) addCubes(p);
    std::vector<CubePred> regions{CubePred{D.all_tags(), 0, 0}};
    for (auto& [kk, p] : cubes) detail_mso::split_regions(regions, p);
    for (const CubePred& r : regions) {
      Key nk;
      nk.q0 = step(k.q0, r, false);
      for (int p : k.pending) nk.pending.push_back(step(p, r, false));
      nk.pending.push_back(step(k.q0, r, true));  // the run marking this position
      int t = get(nk);
      out.add_edge(s, drop_x_bit(r), t);
    }
  }
  return moore_minimize(out);
}

}  // namespace mso

// ---------------------------------------------------------------------------
// Classical MSO -> NFA compilation. Formulas must be data-test-free; tracks
// are named after the variables.

namespace detail {

inline Nfa atom_nfa(const std::vector<Tag>& tags, const FormulaPtr& f);

// States 0 -> 1 (-> 2) skeletons; marks outside the atom's tracks are
// unconstrained.
inline Nfa two_phase(const std::vector<Tag>& tags, const std::string& x,
                     std::uint64_t extraCare, std::uint64_t extraBits, bool tagRestrict,
                     std::uint64_t tagMaskMark, const std::vector<std::string>& tracks) {
  Nfa a = mso::make(tags, tracks);
  int s0 = a.add_state(), s1 = a.add_state();
  std::uint64_t all = a.all_tags();
  int xi = a.track_index(x);
  std::uint64_t xb = std::uint64_t{1} << xi;
  a.add_edge(s0, CubePred{all, xb, 0}, s0);
  CubePred mark{tagRestrict ? tagMaskMark : all, xb | extraCare, xb | extraBits};
  a.add_edge(s0, mark, s1);
  a.add_edge(s1, CubePred{all, xb, 0}, s1);
  a.initial = {s0};
  a.finals = {s1};
  return a;
}

inline Nfa atom_nfa(const std::vector<Tag>& tags, const FormulaPtr& f) {
  using K = NodeKind;
  std::uint64_t all = (std::uint64_t{1} << tags.size()) - 1;
  switch (f->kind) {
    case K::True: {
      Nfa a = mso::make(tags, {});
      int s = a.add_state();
      a.add_edge(s, CubePred{all, 0, 0}, s);
      a.initial = {s};
      a.finals = {s};
      return a;
    }
    case K::False: {
      Nfa a = mso::make(tags, {});
      int s = a.add_state();
      a.add_edge(s, CubePred{all, 0, 0}, s);
      a.initial = {s};
      return a;
    }
    case K::Less:
    case K::Succ: {
      std::vector<std::string> tracks = {f->v1, f->v2};
      std::sort(tracks.begin(), tracks.end());
      Nfa a = mso::make(tags, tracks);
      int s0 = a.add_state(), s1 = a.add_state(), s2 = a.add_state();
      std::uint64_t xb = std::uint64_t{1} << a.track_index(f->v1);
      std::uint64_t yb = std::uint64_t{1} << a.track_index(f->v2);
      a.add_edge(s0, CubePred{all, xb | yb, 0}, s0);
      a.add_edge(s0, CubePred{all, xb | yb, xb}, s1);
      a.add_edge(s1, CubePred{all, xb | yb, yb}, s2);
      if (f->kind == K::Less) a.add_edge(s1, CubePred{all, xb | yb, 0}, s1);
      a.add_edge(s2, CubePred{all, xb | yb, 0}, s2);
      a.initial = {s0};
      a.finals = {s2};
      return a;
    }
    case K::Eq: {
      if (f->v1 == f->v2) return atom_nfa(tags, mk::tru());
      std::vector<std::string> tracks = {f->v1, f->v2};
      std::sort(tracks.begin(), tracks.end());
      Nfa a = mso::make(tags, tracks);
      int s0 = a.add_state(), s1 = a.add_state();
      std::uint64_t xb = std::uint64_t{1} << a.track_index(f->v1);
      std::uint64_t yb = std::uint64_t{1} << a.track_index(f->v2);
      a.add_edge(s0, CubePred{all, xb | yb, 0}, s0);
      a.add_edge(s0, CubePred{all, xb | yb, xb | yb}, s1);
      a.add_edge(s1, CubePred{all, xb | yb, 0}, s1);
      a.initial = {s0};
      a.finals = {s1};
      return a;
    }
    case K::First: {
      Nfa a = mso::make(tags, {f->v1});
      int s0 = a.add_state(), s1 = a.add_state();
      a.add_edge(s0, CubePred{all, 1, 1}, s1);
      a.add_edge(s1, CubePred{all, 1, 0}, s1);
      a.initial = {s0};
      a.finals = {s1};
      return a;
    }
    case K::Last: {
      Nfa a = mso::make(tags, {f->v1});
      int s0 = a.add_state(), s1 = a.add_state();
      a.add_edge(s0, CubePred{all, 1, 0}, s0);
      a.add_edge(s0, CubePred{all, 1, 1}, s1);
      a.initial = {s0};
      a.finals = {s1};
      return a;
    }
    case K::TagAtom: {
      int tagIdx = -1;
      for (std::size_t i = 0; i < tags.size(); ++i)
        if (tags[i] == f->tag) tagIdx = static_cast<int>(i);
      if (tagIdx < 0) {
        // the tag is outside the declared alphabet: unsatisfiable atom
        Nfa a = mso::make(tags, {f->v1});
        int s = a.add_state();
        a.add_edge(s, CubePred{all, 0, 0}, s);
        a.initial = {s};
        return a;
      }
      return two_phase(tags, f->v1, 0, 0, true, std::uint64_t{1} << tagIdx, {f->v1});
    }
    case K::In: {
      std::vector<std::string> tracks = {f->v1, f->v2};
      std::sort(tracks.begin(), tracks.end());
      Nfa a = mso::make(tags, tracks);
      int s0 = a.add_state(), s1 = a.add_state();
      std::uint64_t xb = std::uint64_t{1} << a.track_index(f->v1);
      std::uint64_t yb = std::uint64_t{1} << a.track_index(f->v2);
      a.add_edge(s0, CubePred{all, xb, 0}, s0);
      a.add_edge(s0, CubePred{all, xb | yb, xb | yb}, s1);
      a.add_edge(s1, CubePred{all, xb, 0}, s1);
      a.initial = {s0};
      a.finals = {s1};
      return a;
    }
    default:
      throw DmlError("atom_nfa: not an atom");
  }
}

// Exactly one mark on the named track.
inline Nfa singleton_nfa(const std::vector<Tag>& tags, const std::string& x) {
  std::uint64_t all = (std::uint64_t{1} << tags.size()) - 1;
  Nfa a = mso::make(tags, {x});
  int s0 = a.add_state(), s1 = a.add_state();
  a.add_edge(s0, CubePred{all, 1, 0}, s0);
  a.add_edge(s0, CubePred{all, 1, 1}, s1);
  a.add_edge(s1, CubePred{all, 1, 0}, s1);
  a.initial = {s0};
  a.finals = {s1};
  return a;
}

inline Nfa compile_rec(const FormulaPtr& f, const std::vector<Tag>& tags,
                       const MsoLimits& limits) {
  using K = NodeKind;
  switch (f->kind) {
    case K::Not:
      return mso::complement(compile_rec(f->a, tags, limits), limits);
    case K::And:
      return mso::minimize(
          mso::intersect(compile_rec(f->a, tags, limits), compile_rec(f->b, tags, limits)),
          limits);
    case K::Or:
      return mso::minimize(
          mso::unite(compile_rec(f->a, tags, limits), compile_rec(f->b, tags, limits)), limits);
    case K::Implies:
      return mso::minimize(
          mso::unite(mso::complement(compile_rec(f->a, tags, limits), limits),
                     compile_rec(f->b, tags, limits)),
          limits);
    case K::Iff: {
      Nfa a = compile_rec(f->a, tags, limits);
      Nfa b = compile_rec(f->b, tags, limits);
      Nfa both = mso::intersect(a, b);
      Nfa neither = mso::intersect(mso::complement(a, limits), mso::complement(b, limits));
      return mso::minimize(mso::unite(both, neither), limits);
    }
    case K::ExistsFO:
    case K::ForallFO: {
      bool ex = f->kind == K::ExistsFO;
      Nfa body = mso::to_min_dfa(compile_rec(f->a, tags, limits), limits);
      return mso::quantify_position(body, f->v1, ex, limits);
    }
    case K::ExistsSO:
    case K::ForallSO: {
      bool ex = f->kind == K::ExistsSO;
      FormulaPtr body = ex ? f->a : mk::lnot(f->a);
      Nfa inner = compile_rec(body, tags, limits);
      if (inner.track_index(f->v1) < 0) return ex ? inner : mso::complement(inner, limits);
      Nfa projected = mso::minimize(mso::project(inner, f->v1), limits);
      return ex ? projected : mso::complement(projected, limits);
    }
    case K::RigidTest:
    case K::SemiRigidTest:
    case K::RawTest:
      throw DmlError("compile_mso: formula contains data tests");
    default:
      return atom_nfa(tags, f);
  }
}

}  // namespace detail

// Compiles a data-test-free MSO formula into an NFA whose tracks are its
// free variables; free first-order variables get singleton-validity
// conjuncts so that L(nfa) is exactly the annotated-word language.
inline Nfa compile_mso(const FormulaPtr& f, const std::vector<Tag>& tags,
                       const MsoLimits& limits = {}) {
  Nfa a = detail::compile_rec(f, tags, limits);
  for (const std::string& v : free_fo(f)) a = mso::intersect(a, detail::singleton_nfa(tags, v));
  // free variables that the automaton never read still deserve tracks
  std::set<std::string> want(free_fo(f).begin(), free_fo(f).end());
  want.insert(free_so(f).begin(), free_so(f).end());
  std::set<std::string> have(a.tracks.begin(), a.tracks.end());
  std::vector<std::string> tracks;
  std::set_union(want.begin(), want.end(), have.begin(), have.end(), std::back_inserter(tracks));
  return mso::align(a, tracks);
}

// ---------------------------------------------------------------------------
// The data-satisfiability reduction.

struct ReducedSentence {
  FormulaPtr core;                             // psi^- over $c predicates
  std::vector<GuardedTestDescriptor> tests;    // n descriptors
  FormulaPtr partitionMatrix;                  // conjunction of the biconditionals
  FormulaPtr full;                             // core & disjointness & biconditionals
  std::size_t n = 0;
};

inline ReducedSentence reduce_data_sentence(const FormulaPtr& psi) {
  NormalizedFormula norm = normalize_tests(psi);
  ReducedSentence red;
  red.core = norm.core;
  red.tests = norm.tests;
  red.n = norm.tests.size();

  // Guards may use only the test's own variables (plus inner predicates).
  for (const auto& d : norm.tests) {
    for (const std::string& v : free_fo(d.alpha))
      if (v != d.x && v != d.y)
        throw DmlError("guard of a data test has extraneous free variable '" + v + "'");
    for (const std::string& v : free_fo(d.beta))
      if (v != d.x && v != d.z)
        throw DmlError("guard of a data test has extraneous free variable '" + v + "'");
    for (const std::string& v : free_so(d.alpha))
      if (v.empty() || v[0] != '$')
        throw DmlError("guard of a data test has a free second-order variable '" + v + "'");
    for (const std::string& v : free_so(d.beta))
      if (v.empty() || v[0] != '$')
        throw DmlError("guard of a data test has a free second-order variable '" + v + "'");
  }

  auto zvar = [](std::size_t i) { return "$Z" + std::to_string(i + 1); };

  FormulaPtr conj = red.core;
  FormulaPtr matrix;
  // pairwise disjointness of the partition variables
  for (std::size_t i = 0; i < red.n; ++i)
    for (std::size_t j = i + 1; j < red.n; ++j) {
      FormulaPtr d = mk::forall(
          "x", mk::lnot(mk::land(mk::in("x", zvar(i)), mk::in("x", zvar(j)))));
      conj = mk::land(conj, d);
    }
  // one biconditional per guarded test occurrence; for tests that came from
  // a rigid guard, beta is x = z and z is substituted away
  for (const auto& d : red.tests) {
    auto orZ = [&](const std::string& u, const std::string& v) {
      // same position means same value even outside every partition class
      FormulaPtr o = mk::eq(u, v);
      for (std::size_t i = 0; i < red.n; ++i)
        o = mk::lor(o, mk::land(mk::in(u, zvar(i)), mk::in(v, zvar(i))));
      return o;
    };
    FormulaPtr gamma;
    if (d.fromRigid) {
      gamma = mk::exists(d.y, mk::land(d.alpha, orZ(d.y, d.x)));
    } else {
      gamma = mk::exists(
          d.y, mk::exists(d.z, mk::land(mk::land(d.alpha, d.beta), orZ(d.y, d.z))));
    }
    FormulaPtr bic = mk::forall(d.x, mk::iff(mk::in(d.x, d.predicate), gamma));
    conj = mk::land(conj, bic);
    matrix = matrix ? mk::land(matrix, bic) : bic;
  }
  red.partitionMatrix = matrix ? matrix : mk::tru();
  red.full = conj;
  return red;
}

struct SatResult {
  bool satisfiable = false;
  std::optional<DataWord> witness;
  int nfaStates = 0;            // final product automaton
  int statesBeforeDet = 0;      // partition body before determinization
  int statesAfterDet = 0;       // ... and after (0 when no tests occur)
  std::size_t partitions = 0;   // number of partition variables used
};

// Decides satisfiability of a grammar-conformant sentence over data words
// and reconstructs a verified witness when one exists. The partition formula
// is compiled through a single shared position quantifier: all biconditional
// bodies and the disjointness constraints are conjoined first, so only one
// universal quantification over positions is ever performed.
inline SatResult satisfiable(const FormulaPtr& psi, const std::vector<Tag>& tags,
                             const MsoLimits& limits = {}) {
  if (!free_fo(psi).empty() || !free_so(psi).empty())
    throw DmlError("satisfiable: the formula must be a sentence");
  ReducedSentence red = reduce_data_sentence(psi);
  auto zvar = [](std::size_t i) { return "$Z" + std::to_string(i + 1); };

  Nfa a = compile_mso(red.core, tags, limits);
  int statesBeforeDet = 0, statesAfterDet = 0;
  if (red.n > 0) {
    const std::string qx = "$qx";
    FormulaPtr body;
    auto conjoin = [&](const FormulaPtr& f) { body = body ? mk::land(body, f) : f; };
    for (std::size_t i = 0; i < red.n; ++i)
      for (std::size_t j = i + 1; j < red.n; ++j)
        conjoin(mk::lnot(mk::land(mk::in(qx, zvar(i)), mk::in(qx, zvar(j)))));
    for (const auto& d : red.tests) {
      auto orZ = [&](const std::string& u, const std::string& v) {
        FormulaPtr o = mk::eq(u, v);
        for (std::size_t i = 0; i < red.n; ++i)
          o = mk::lor(o, mk::land(mk::in(u, zvar(i)), mk::in(v, zvar(i))));
        return o;
      };
      FormulaPtr gamma;
      if (d.fromRigid) {
        FormulaPtr alpha = substitute_fo(d.alpha, {{d.x, qx}});
        gamma = mk::exists(d.y, mk::land(alpha, orZ(d.y, qx)));
      } else {
        FormulaPtr alpha = substitute_fo(d.alpha, {{d.x, qx}});
        FormulaPtr beta = substitute_fo(d.beta, {{d.x, qx}});
        gamma =
            mk::exists(d.y, mk::exists(d.z, mk::land(mk::land(alpha, beta), orZ(d.y, d.z))));
      }
      conjoin(mk::iff(mk::in(qx, d.predicate), gamma));
    }
    Nfa bodyNfa = detail::compile_rec(body, tags, limits);
    statesBeforeDet = bodyNfa.nStates;
    Nfa D = mso::to_min_dfa(bodyNfa, limits);
    statesAfterDet = D.nStates;
    Nfa part = mso::quantify_position(D, qx, false, limits);
    a = mso::reduce(mso::intersect(a, part));
  }

  SatResult res;
  res.nfaStates = a.nStates;
  res.statesBeforeDet = statesBeforeDet;
  res.statesAfterDet = statesAfterDet;
  res.partitions = red.n;
  auto w = mso::shortest_word(a);
  if (!w) return res;
  res.satisfiable = true;

  // Rebuild the data word: positions sharing a partition class get that
  // class's index as value; everything else gets fresh pairwise-distinct
  // values.
  DataWord word;
  DataValue fresh = static_cast<DataValue>(red.n);
  std::vector<int> zTrack(red.n, -1);
  for (std::size_t i = 0; i < red.n; ++i)
    zTrack[i] = a.track_index("$Z" + std::to_string(i + 1));
  for (const auto& letter : *w) {
    DataValue v = 0;
    for (std::size_t i = 0; i < red.n; ++i)
      if (zTrack[i] >= 0 && ((letter.bits >> zTrack[i]) & 1u)) {
        v = static_cast<DataValue>(i + 1);
        break;
      }
    if (v == 0) v = ++fresh;
    word.letters.push_back({v, tags[static_cast<std::size_t>(letter.tagIdx)]});
  }
  if (!evaluate(psi, word, {})) throw DmlError("internal: satisfiability witness failed to verify");
  res.witness = word;
  return res;
}

inline bool valid(const FormulaPtr& psi, const std::vector<Tag>& tags,
                  const MsoLimits& limits = {}) {
  return !satisfiable(mk::lnot(psi), tags, limits).satisfiable;
}

}  // namespace dml

#endif

#ifndef DML_FMA_HPP
#define DML_FMA_HPP

#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dml/morphism.hpp"
#include "dml/nominal.hpp"
#include "dml/presentation.hpp"

namespace dml {

// Finite memory automata with equivariant transition relations given by
// representatives: the input value is either equal to a specific register of
// the source or fresh with respect to all of them.

struct FmaStateOrbit {
  std::string name;
  int registers = 0;
};

struct FmaPattern {
  bool fresh = true;
  int reg = 0;  // 1-based when !fresh

  bool operator<(const FmaPattern& o) const {
    return std::make_pair(fresh, reg) < std::make_pair(o.fresh, o.reg);
  }
  bool operator==(const FmaPattern& o) const { return fresh == o.fresh && reg == o.reg; }
};

struct FmaExpr {
  bool input = false;
  int reg = 0;  // 1-based when !input

  bool operator==(const FmaExpr& o) const { return input == o.input && reg == o.reg; }
};

struct FmaTransition {
  int from = 0;
  Tag tag;
  FmaPattern pattern;
  int to = 0;
  std::vector<FmaExpr> exprs;
};

struct Config {
  int state = 0;
  std::vector<DataValue> registers;

  bool operator==(const Config& o) const { return state == o.state && registers == o.registers; }
  bool operator<(const Config& o) const {
    return std::tie(state, registers) < std::tie(o.state, o.registers);
  }
};

struct Fma {
  std::string name;
  std::vector<Tag> tags;
  std::vector<FmaStateOrbit> states;
  std::vector<int> initialStates;  // canonical registers 1..k
  std::set<int> finals;
  std::vector<FmaTransition> transitions;

  int state_id(const std::string& n) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i].name == n) return static_cast<int>(i);
    return -1;
  }

  std::vector<Config> initial_configs() const {
    std::vector<Config> out;
    for (int s : initialStates) {
      Config c;
      c.state = s;
      for (int i = 1; i <= states[static_cast<std::size_t>(s)].registers; ++i)
        c.registers.push_back(static_cast<DataValue>(i));
      out.push_back(c);
    }
    return out;
  }

  void validate() const {
    for (const auto& t : transitions) {
      const auto& from = states.at(static_cast<std::size_t>(t.from));
      const auto& to = states.at(static_cast<std::size_t>(t.to));
      if (!t.pattern.fresh && (t.pattern.reg < 1 || t.pattern.reg > from.registers))
        throw DmlError("fma: pattern register out of range");
      if (static_cast<int>(t.exprs.size()) != to.registers)
        throw DmlError("fma: register update arity mismatch");
      // distinctness of the target registers, with input identified with the
      // matched register under an equality pattern
      auto slot = [&](const FmaExpr& e) {
        if (e.input) return t.pattern.fresh ? 0 : t.pattern.reg;
        return e.reg;
      };
      std::set<int> seen;
      for (const auto& e : t.exprs) {
        if (!e.input && (e.reg < 1 || e.reg > from.registers))
          throw DmlError("fma: update expression register out of range");
        if (!seen.insert(slot(e)).second)
          throw DmlError("fma: register update would duplicate a value");
      }
      if (std::find(tags.begin(), tags.end(), t.tag) == tags.end())
        throw DmlError("fma: transition tag outside the alphabet");
    }
  }
};

// ---------------------------------------------------------------------------

inline std::vector<Config> step(const Fma& a, const Config& c, const Letter& letter) {
  std::vector<Config> out;
  bool isFresh =
      std::find(c.registers.begin(), c.registers.end(), letter.value) == c.registers.end();
  for (const auto& t : a.transitions) {
    if (t.from != c.state || t.tag != letter.tag) continue;
    if (t.pattern.fresh) {
      if (!isFresh) continue;
    } else {
      if (c.registers[static_cast<std::size_t>(t.pattern.reg - 1)] != letter.value) continue;
    }
    Config n;
    n.state = t.to;
    for (const auto& e : t.exprs)
      n.registers.push_back(e.input ? letter.value
                                    : c.registers[static_cast<std::size_t>(e.reg - 1)]);
    out.push_back(std::move(n));
  }
  return out;
}

struct RunReport {
  bool accepted = false;
  std::size_t run_count = 0;
  std::optional<std::vector<Config>> trace;
};

inline RunReport run(const Fma& a, const DataWord& w, std::size_t count_limit = 1) {
  RunReport rep;
  std::vector<Config> trace;
  std::function<void(const Config&, std::size_t)> dfs = [&](const Config& c, std::size_t pos) {
    if (rep.run_count >= count_limit) return;
    if (pos > w.size()) {
      if (a.finals.count(c.state)) {
        ++rep.run_count;
        rep.accepted = true;
        if (!rep.trace) rep.trace = trace;
      }
      return;
    }
    for (const Config& n : step(a, c, w.at(pos))) {
      trace.push_back(n);
      dfs(n, pos + 1);
      trace.pop_back();
      if (rep.run_count >= count_limit) return;
    }
  };
  for (const Config& c : a.initial_configs()) {
    trace = {c};
    dfs(c, 1);
  }
  return rep;
}

inline bool is_deterministic(const Fma& a) {
  if (a.initialStates.size() != 1) return false;
  if (a.states[static_cast<std::size_t>(a.initialStates[0])].registers != 0) return false;
  std::map<std::tuple<int, Tag, FmaPattern>, const FmaTransition*> seen;
  for (const auto& t : a.transitions) {
    auto key = std::make_tuple(t.from, t.tag, t.pattern);
    auto [it, fresh] = seen.emplace(key, &t);
    if (!fresh && !(it->second->to == t.to && it->second->exprs == t.exprs)) return false;
  }
  return true;
}

// Adds a rejecting sink so every configuration has a move for every case.
inline Fma complete_fma(const Fma& a) {
  Fma b = a;
  int dead = -1;
  auto ensure_dead = [&]() {
    if (dead < 0) {
      dead = static_cast<int>(b.states.size());
      b.states.push_back({"dead", 0});
      for (const Tag& t : b.tags)
        b.transitions.push_back({dead, t, FmaPattern{true, 0}, dead, {}});
    }
    return dead;
  };
  std::size_t nOriginal = a.states.size();
  for (std::size_t s = 0; s < nOriginal; ++s) {
    int k = a.states[s].registers;
    for (const Tag& tag : a.tags) {
      std::vector<FmaPattern> cases;
      cases.push_back({true, 0});
      for (int i = 1; i <= k; ++i) cases.push_back({false, i});
      for (const auto& pat : cases) {
        bool covered = false;
        for (const auto& t : a.transitions)
          if (t.from == static_cast<int>(s) && t.tag == tag && t.pattern == pat) covered = true;
        if (!covered)
          b.transitions.push_back({static_cast<int>(s), tag, pat, ensure_dead(), {}});
      }
    }
  }
  return b;
}

// Complement of a deterministic automaton: complete, then flip finals.
inline Fma complement_deterministic(const Fma& a) {
  if (!is_deterministic(a)) throw DmlError("complement requires a deterministic automaton");
  Fma b = complete_fma(a);
  std::set<int> flipped;
  for (std::size_t s = 0; s < b.states.size(); ++s)
    if (!b.finals.count(static_cast<int>(s))) flipped.insert(static_cast<int>(s));
  b.finals = flipped;
  return b;
}

inline Fma disjoint_union(const Fma& a, const Fma& b) {
  Fma c = a;
  c.name = a.name + "+" + b.name;
  for (const Tag& t : b.tags)
    if (std::find(c.tags.begin(), c.tags.end(), t) == c.tags.end()) c.tags.push_back(t);
  int off = static_cast<int>(a.states.size());
  for (const auto& s : b.states) c.states.push_back(s);
  for (int s : b.initialStates) c.initialStates.push_back(s + off);
  for (int s : b.finals) c.finals.insert(s + off);
  for (auto t : b.transitions) {
    t.from += off;
    t.to += off;
    c.transitions.push_back(t);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pair construction with merged registers: a pair state carries the left
// registers followed by the right registers that are not shared with any
// left one; the sharing map records the overlap pattern.

enum class FmaProductMode { Union, Intersection };

namespace detail {

struct PairState {
  int s1 = 0, s2 = 0;
  // for each right register: index (1-based) of the merged slot it equals
  std::vector<int> rightSlot;
  bool operator<(const PairState& o) const {
    return std::tie(s1, s2, rightSlot) < std::tie(o.s1, o.s2, o.rightSlot);
  }
};

}  // namespace detail

inline Fma product(const Fma& a1raw, const Fma& a2raw, FmaProductMode mode) {
  if (a1raw.tags != a2raw.tags) throw DmlError("fma product requires equal tag alphabets");
  Fma a1 = complete_fma(a1raw);
  Fma a2 = complete_fma(a2raw);

  Fma out;
  out.name = a1raw.name + (mode == FmaProductMode::Union ? "|" : "&") + a2raw.name;
  out.tags = a1raw.tags;

  std::map<detail::PairState, int> ids;
  std::deque<detail::PairState> todo;
  auto mergedArity = [&](const detail::PairState& p) {
    int k1 = a1.states[static_cast<std::size_t>(p.s1)].registers;
    int own = 0;
    for (int s : p.rightSlot)
      if (s > k1) ++own;
    return k1 + own;
  };
  auto get = [&](const detail::PairState& p) {
    auto [it, fresh] = ids.emplace(p, static_cast<int>(out.states.size()));
    if (fresh) {
      std::string nm = a1.states[static_cast<std::size_t>(p.s1)].name + "," +
                       a2.states[static_cast<std::size_t>(p.s2)].name;
      for (int s : p.rightSlot) nm += "_" + std::to_string(s);
      out.states.push_back({nm, mergedArity(p)});
      bool f1 = a1.finals.count(p.s1) > 0, f2 = a2.finals.count(p.s2) > 0;
      if (mode == FmaProductMode::Union ? (f1 || f2) : (f1 && f2))
        out.finals.insert(it->second);
      todo.push_back(p);
    }
    return it->second;
  };

  for (int i1 : a1.initialStates)
    for (int i2 : a2.initialStates) {
      int k1 = a1.states[static_cast<std::size_t>(i1)].registers;
      int k2 = a2.states[static_cast<std::size_t>(i2)].registers;
      // canonical initial registers are 1..k on both sides, hence shared
      (void)k1;
      detail::PairState p;
      p.s1 = i1;
      p.s2 = i2;
      for (int i = 1; i <= k2; ++i) p.rightSlot.push_back(i);
      out.initialStates.push_back(get(p));
    }

  while (!todo.empty()) {
    detail::PairState p = todo.front();
    todo.pop_front();
    int from = ids.at(p);
    int k1 = a1.states[static_cast<std::size_t>(p.s1)].registers;
    int merged = mergedArity(p);
    // merged slot of each right register, and the right register of each slot
    const std::vector<int>& rightSlot = p.rightSlot;

    for (const Tag& tag : out.tags) {
      // cases over the merged registers plus fresh
      for (int cs = 0; cs <= merged; ++cs) {
        bool fresh = cs == 0;
        FmaPattern pat1, pat2;
        if (fresh) {
          pat1 = {true, 0};
          pat2 = {true, 0};
        } else {
          pat1 = cs <= k1 ? FmaPattern{false, cs} : FmaPattern{true, 0};
          pat2 = {true, 0};
          for (std::size_t i = 0; i < rightSlot.size(); ++i)
            if (rightSlot[i] == cs) pat2 = {false, static_cast<int>(i + 1)};
        }
        for (const auto& t1 : a1.transitions) {
          if (t1.from != p.s1 || t1.tag != tag || !(t1.pattern == pat1)) continue;
          for (const auto& t2 : a2.transitions) {
            if (t2.from != p.s2 || t2.tag != tag || !(t2.pattern == pat2)) continue;
            // symbolic targets over merged slots; 0 stands for the input
            auto slotOf1 = [&](const FmaExpr& e) { return e.input ? (fresh ? 0 : cs) : e.reg; };
            auto slotOf2 = [&](const FmaExpr& e) {
              if (e.input) return fresh ? 0 : cs;
              return rightSlot[static_cast<std::size_t>(e.reg - 1)];
            };
            std::vector<int> t1slots, t2slots;
            for (const auto& e : t1.exprs) t1slots.push_back(slotOf1(e));
            for (const auto& e : t2.exprs) t2slots.push_back(slotOf2(e));
            // build the new merged tuple: left registers first
            detail::PairState np;
            np.s1 = t1.to;
            np.s2 = t2.to;
            std::vector<int> mergedSources = t1slots;  // slot ids (0 = input)
            std::vector<FmaExpr> exprs;
            auto exprFor = [&](int slot) {
              return slot == 0 ? FmaExpr{true, 0} : FmaExpr{false, slot};
            };
            for (int s : t1slots) exprs.push_back(exprFor(s));
            for (std::size_t i = 0; i < t2slots.size(); ++i) {
              auto it = std::find(mergedSources.begin(), mergedSources.end(), t2slots[i]);
              if (it != mergedSources.end()) {
                np.rightSlot.push_back(static_cast<int>(it - mergedSources.begin()) + 1);
              } else {
                mergedSources.push_back(t2slots[i]);
                exprs.push_back(exprFor(t2slots[i]));
                np.rightSlot.push_back(static_cast<int>(mergedSources.size()));
              }
            }
            int to = get(np);
            FmaPattern pat = fresh ? FmaPattern{true, 0} : FmaPattern{false, cs};
            out.transitions.push_back({from, tag, pat, to, exprs});
          }
        }
      }
    }
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Monoid recognizers as deterministic FMA: states are the reachable element
// orbits, registers their memory, transitions right multiplication.

inline Fma from_morphism(const Recognizer& R) {
  const Presentation& P = *R.morphism.target;
  std::vector<Term> reps = reachable_orbits(R.morphism);
  Fma a;
  a.name = "monoid";
  a.tags = R.morphism.tags();

  std::map<Term, int> stateOf;
  for (const Term& rep : reps) {
    int id = static_cast<int>(a.states.size());
    a.states.push_back({P.orbit(rep.orbit).name + "#" + std::to_string(id),
                        static_cast<int>(rep.values.size())});
    stateOf[rep] = id;
    if (R.accepts_orbit(rep.orbit)) a.finals.insert(id);
  }
  Term idRep = canonical_element(P, P.identity_term());
  a.initialStates = {stateOf.at(idRep)};

  for (const Term& rep : reps) {
    int from = stateOf.at(rep);
    int k = static_cast<int>(rep.values.size());
    for (const Tag& tag : a.tags) {
      for (int cs = 0; cs <= k; ++cs) {
        bool fresh = cs == 0;
        DataValue d = fresh ? static_cast<DataValue>(k + 1)
                            : rep.values[static_cast<std::size_t>(cs - 1)];
        Term next = P.normalize(P.product(rep, R.morphism.image(d, tag)));
        // canonicalize and express the target registers over {regs, input}
        Term key = canonical_element(P, next);
        auto it = stateOf.find(key);
        if (it == stateOf.end()) throw DmlError("from_morphism: unreachable orbit appeared");
        // find a bijection onto the representative
        std::vector<DataValue> vals = next.values;
        std::vector<FmaExpr> exprs(vals.size());
        std::vector<std::size_t> idx(vals.size());
        std::iota(idx.begin(), idx.end(), 0);
        bool found = false;
        std::sort(idx.begin(), idx.end());
        do {
          std::map<DataValue, DataValue> m;
          for (std::size_t i = 0; i < vals.size(); ++i)
            m[vals[i]] = static_cast<DataValue>(idx[i] + 1);
          Term cand = P.normalize(act_term(Renaming::extend_injection(m), next));
          if (cand == key) {
            for (std::size_t i = 0; i < vals.size(); ++i) {
              DataValue source = vals[i];
              FmaExpr e;
              if (!fresh && source == d) {
                e = {false, cs};
              } else if (source == d) {
                e = {true, 0};
              } else {
                int reg = 0;
                for (std::size_t j = 0; j < rep.values.size(); ++j)
                  if (rep.values[j] == source) reg = static_cast<int>(j + 1);
                if (reg == 0) throw DmlError("from_morphism: target register escapes the sources");
                e = {false, reg};
              }
              exprs[idx[i]] = e;
            }
            found = true;
            break;
          }
        } while (std::next_permutation(idx.begin(), idx.end()));
        if (!found) throw DmlError("from_morphism: could not canonicalize a target");
        FmaPattern pat = fresh ? FmaPattern{true, 0} : FmaPattern{false, cs};
        a.transitions.push_back({from, tag, pat, it->second, exprs});
      }
    }
  }
  a.validate();
  return a;
}

// ---------------------------------------------------------------------------

struct UnambiguityVerdict {
  bool unambiguous = true;
  std::optional<DataWord> counterexample;
};

inline UnambiguityVerdict unambiguity_bounded(const Fma& a, std::size_t maxLen, DataValue maxVal) {
  UnambiguityVerdict v;
  std::function<void(DataWord&)> rec = [&](DataWord& w) {
    if (!v.unambiguous) return;
    RunReport rep = run(a, w, 2);
    if (rep.run_count >= 2) {
      v.unambiguous = false;
      v.counterexample = w;
      return;
    }
    if (w.size() == maxLen) return;
    for (const Tag& t : a.tags)
      for (DataValue d = 1; d <= maxVal; ++d) {
        w.letters.push_back({d, t});
        rec(w);
        w.letters.pop_back();
      }
  };
  DataWord w;
  rec(w);
  return v;
}

// ---------------------------------------------------------------------------
// Text format.

inline Fma load_fma_text(const std::string& text) {
  Fma a;
  std::istringstream in(text);
  std::string rawLine;
  int lineNo = 0;
  struct PendingTrans {
    std::string from, tag, patternTok, to;
    std::vector<std::string> fromRegs, toExprs;
    int line;
  };
  std::vector<PendingTrans> pending;
  auto fail = [&](const std::string& msg) -> void {
    throw DmlError("line " + std::to_string(lineNo) + ": " + msg);
  };
  auto parseTermish = [&](const std::string& s, std::string& name, std::vector<std::string>& args) {
    auto lp = s.find('(');
    auto rp = s.rfind(')');
    if (lp == std::string::npos || rp == std::string::npos || rp < lp)
      fail("expected name(...) but got '" + s + "'");
    name = s.substr(0, lp);
    std::string inner = s.substr(lp + 1, rp - lp - 1);
    std::istringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      std::string t;
      for (char c : tok)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
      if (!t.empty()) args.push_back(t);
    }
  };
  while (std::getline(in, rawLine)) {
    ++lineNo;
    auto hash = rawLine.find('#');
    std::string line = hash == std::string::npos ? rawLine : rawLine.substr(0, hash);
    std::istringstream l(line);
    std::string kw;
    if (!(l >> kw)) continue;
    if (kw == "fma") {
      l >> a.name;
    } else if (kw == "tags") {
      std::string t;
      while (l >> t) a.tags.push_back(t);
    } else if (kw == "state") {
      std::string decl, flag;
      if (!(l >> decl)) fail("state needs name/registers");
      auto slash = decl.find('/');
      if (slash == std::string::npos) fail("state declaration needs name/registers");
      FmaStateOrbit s;
      s.name = decl.substr(0, slash);
      s.registers = std::stoi(decl.substr(slash + 1));
      if (a.state_id(s.name) >= 0) fail("duplicate state '" + s.name + "'");
      a.states.push_back(s);
      int id = static_cast<int>(a.states.size() - 1);
      while (l >> flag) {
        if (flag == "initial")
          a.initialStates.push_back(id);
        else if (flag == "final")
          a.finals.insert(id);
        else
          fail("unknown state flag '" + flag + "'");
      }
    } else if (kw == "trans") {
      std::string src, letter, arrow, dst;
      if (!(l >> src >> letter >> arrow >> dst) || arrow != "->")
        fail("transition syntax: trans q(1) a@=1 -> p(...)");
      PendingTrans t;
      t.line = lineNo;
      parseTermish(src, t.from, t.fromRegs);
      parseTermish(dst, t.to, t.toExprs);
      auto at = letter.find('@');
      if (at == std::string::npos) fail("letter needs tag@pattern");
      t.tag = letter.substr(0, at);
      t.patternTok = letter.substr(at + 1);
      pending.push_back(t);
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }
  for (const auto& p : pending) {
    lineNo = p.line;
    FmaTransition t;
    t.from = a.state_id(p.from);
    t.to = a.state_id(p.to);
    if (t.from < 0) fail("unknown state '" + p.from + "'");
    if (t.to < 0) fail("unknown state '" + p.to + "'");
    for (std::size_t i = 0; i < p.fromRegs.size(); ++i)
      if (p.fromRegs[i] != std::to_string(i + 1))
        fail("source registers must be written 1..k in order");
    if (static_cast<int>(p.fromRegs.size()) !=
        a.states[static_cast<std::size_t>(t.from)].registers)
      fail("source register count mismatch");
    t.tag = p.tag;
    if (std::find(a.tags.begin(), a.tags.end(), t.tag) == a.tags.end()) a.tags.push_back(t.tag);
    if (p.patternTok == "fresh") {
      t.pattern = {true, 0};
    } else if (!p.patternTok.empty() && p.patternTok[0] == '=') {
      t.pattern = {false, std::stoi(p.patternTok.substr(1))};
    } else {
      fail("pattern must be 'fresh' or '=<register>'");
    }
    for (const auto& e : p.toExprs) {
      if (e == "in")
        t.exprs.push_back({true, 0});
      else
        t.exprs.push_back({false, std::stoi(e)});
    }
    a.transitions.push_back(t);
  }
  a.validate();
  return a;
}

inline Fma load_fma_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DmlError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_fma_text(ss.str());
}

inline std::string save_fma_text(const Fma& a) {
  std::ostringstream out;
  out << "fma " << (a.name.empty() ? std::string("m") : a.name) << "\n";
  out << "tags";
  for (const Tag& t : a.tags) out << " " << t;
  out << "\n";
  for (std::size_t s = 0; s < a.states.size(); ++s) {
    out << "state " << a.states[s].name << "/" << a.states[s].registers;
    if (std::find(a.initialStates.begin(), a.initialStates.end(), static_cast<int>(s)) !=
        a.initialStates.end())
      out << " initial";
    if (a.finals.count(static_cast<int>(s))) out << " final";
    out << "\n";
  }
  for (const auto& t : a.transitions) {
    out << "trans " << a.states[static_cast<std::size_t>(t.from)].name << "(";
    for (int i = 1; i <= a.states[static_cast<std::size_t>(t.from)].registers; ++i)
      out << (i > 1 ? "," : "") << i;
    out << ") " << t.tag << "@" << (t.pattern.fresh ? "fresh" : "=" + std::to_string(t.pattern.reg))
        << " -> " << a.states[static_cast<std::size_t>(t.to)].name << "(";
    for (std::size_t i = 0; i < t.exprs.size(); ++i)
      out << (i ? "," : "") << (t.exprs[i].input ? std::string("in") : std::to_string(t.exprs[i].reg));
    out << ")\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// The paper's two automata over the one-letter alphabet.

// Accepts words whose first value reoccurs later.
inline Fma lcurve_fma() {
  return load_fma_text(R"(fma lcurve
tags a
state s0/0 initial
state st/1
state acc/0 final
trans s0() a@fresh -> st(in)
trans st(1) a@=1 -> acc()
trans st(1) a@fresh -> st(1)
trans acc() a@fresh -> acc()
)");
}

// Accepts concatenations of phases: store a value, scan to its first
// reoccurrence, then start over; accept exactly at phase boundaries.
inline Fma lcurvestar_fma() {
  return load_fma_text(R"(fma lcurvestar
tags a
state bnd/0 initial final
state ph/1
trans bnd() a@fresh -> ph(in)
trans ph(1) a@=1 -> bnd()
trans ph(1) a@fresh -> ph(1)
)");
}

}  // namespace dml

#endif

#ifndef DML_SELFTEST_HPP
#define DML_SELFTEST_HPP

#include <chrono>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dml/analysis.hpp"
#include "dml/compile.hpp"
#include "dml/fixtures.hpp"
#include "dml/fma.hpp"
#include "dml/io.hpp"
#include "dml/morphism.hpp"
#include "dml/msoclassic.hpp"
#include "dml/rigidity.hpp"

namespace dml {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  double budget = 0.0;
  std::string detail;
};

namespace selftest_detail {

inline void for_each_word(const std::vector<Tag>& tags, std::size_t maxLen, DataValue maxVal,
                          const std::function<void(const DataWord&)>& f) {
  std::function<void(DataWord&)> rec = [&](DataWord& w) {
    f(w);
    if (w.size() == maxLen) return;
    for (const Tag& t : tags)
      for (DataValue d = 1; d <= maxVal; ++d) {
        w.letters.push_back({d, t});
        rec(w);
        w.letters.pop_back();
      }
  };
  DataWord w;
  rec(w);
}

struct Check {
  bool ok = true;
  std::ostringstream log;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      log << (log.str().empty() ? "" : "; ") << what;
    }
  }
};

inline Recognizer fixture_recognizer(const char* text) {
  auto l = load_monoid_text(text);
  if (!l.morphism) throw DmlError("fixture has no morphism");
  return Recognizer{*l.morphism, l.accepting};
}

// Criterion 1: the L>=3 sentence compiles to the worked-example monoid.
inline Check criterion_l1_monoid() {
  Check c;
  CompileResult r = compile(parse_formula(fixtures::kLgeq3), {"a"});
  QuotientResult q = syntactic_quotient(r.lang.recognizer(), "L1");
  const Presentation& P = *q.recognizer.morphism.target;
  c.expect(P.orbits.size() == 4, "expected 4 orbits, got " + std::to_string(P.orbits.size()));
  if (!c.ok) return c;
  std::multiset<int> arities;
  for (auto& o : P.orbits) arities.insert(o.arity);
  c.expect(arities == std::multiset<int>{0, 0, 1, 2}, "orbit arities are not (0,1,2,0)");
  if (!c.ok) return c;

  // name the orbits by role
  OrbitId idO = P.identity, idP = -1, idQ = -1, idR = -1;
  for (OrbitId o = 0; o < static_cast<OrbitId>(P.orbits.size()); ++o) {
    if (P.arity(o) == 1) idP = o;
    if (P.arity(o) == 2) idQ = o;
    if (P.arity(o) == 0 && o != P.identity) idR = o;
  }
  auto p = [&](DataValue d) { return P.normalize(Term{idP, {d}}); };
  auto qq = [&](DataValue d, DataValue e) { return P.normalize(Term{idQ, {d, e}}); };
  Term o{idO, {}};
  Term rr{idR, {}};
  auto prod = [&](const Term& a, const Term& b) { return P.product(a, b); };

  // every equation of the worked example
  for (const Term& t : {o, p(1), qq(1, 2), rr}) {
    c.expect(prod(o, t) == t && prod(t, o) == t, "identity law");
    c.expect(prod(rr, t) == rr && prod(t, rr) == rr, "r absorbs");
  }
  c.expect(prod(p(1), p(1)) == p(1), "p(d)p(d)=p(d)");
  c.expect(prod(p(1), p(2)) == qq(1, 2), "p(d)p(e)=q(d,e)");
  c.expect(qq(1, 2) == qq(2, 1), "q(d,e) ~ q(e,d)");
  c.expect(prod(qq(1, 2), p(1)) == qq(1, 2), "q(d,e)p(d)=q(d,e)");
  c.expect(prod(p(1), qq(1, 2)) == qq(1, 2), "p(d)q(d,e)=q(d,e)");
  c.expect(prod(qq(1, 2), qq(1, 2)) == qq(1, 2), "q(d,e)q(d,e)=q(d,e)");
  c.expect(prod(qq(1, 2), p(3)) == rr, "q(d,e)p(f)=r");
  c.expect(prod(p(3), qq(1, 2)) == rr, "p(f)q(d,e)=r");
  c.expect(prod(qq(1, 2), qq(1, 3)) == rr, "q(d,e)q(d,f)=r");
  c.expect(prod(qq(1, 2), qq(3, 4)) == rr, "q(d,e)q(f,g)=r");
  return c;
}

// Criterion 2: phi_L2 compiles to the three-orbit monoid and is aperiodic.
inline Check criterion_l2_monoid() {
  Check c;
  CompileResult r = compile(parse_formula(fixtures::kPhiL2), {"a"});
  QuotientResult q = syntactic_quotient(r.lang.recognizer(), "L2");
  const Presentation& P = *q.recognizer.morphism.target;
  c.expect(P.orbits.size() == 3, "expected 3 orbits, got " + std::to_string(P.orbits.size()));
  c.expect(is_aperiodic(P), "quotient is not aperiodic");
  return c;
}

// Criterion 3: the x~y monoid fixture.
inline Check criterion_xsim() {
  Check c;
  auto M = xsim_monoid();
  c.expect(M->validate().ok(), "fixture fails validation");
  auto p = [&](DataValue d) { return M->make_term("p", {d}); };
  auto q = [&](DataValue d) { return M->make_term("q", {d}); };
  Term o = M->make_term("o", {}), r = M->make_term("r", {}), s = M->make_term("s", {});
  c.expect(M->product(p(1), q(1)) == r, "p(d)q(d)=r");
  c.expect(M->product(q(1), p(1)) == r, "q(d)p(d)=r");
  c.expect(M->product(p(1), q(2)) == s, "p(d)q(e)=s");
  c.expect(M->product(q(1), p(2)) == s, "q(d)p(e)=s");
  for (const Term& t : {p(1), q(1), r, s}) {
    c.expect(M->product(r, t) == s && M->product(t, r) == s, "r absorbs into s");
    c.expect(M->product(s, t) == s && M->product(t, s) == s, "s is a null");
  }
  c.expect(M->product(r, o) == r && M->product(o, r) == r, "identity law for r");
  return c;
}

// Criterion 4: structure suite over every shipped presentation.
inline Check criterion_structure() {
  Check c;
  for (const char* text : {fixtures::kL1, fixtures::kL2, fixtures::kXsim, fixtures::kZ2}) {
    auto P = load_monoid_text(text).presentation;
    DataValue c2 = std::min<DataValue>(P->support, 3);
    std::vector<DataValue> vals;
    for (DataValue v = 1; v <= c2; ++v) vals.push_back(v);
    GreenSummary g = green(*P, vals);
    PropertyReport rep = check_structure(*P, g);
    c.expect(rep.mem_union_ok, P->name + ": mem != mem_R u mem_L");
    c.expect(rep.stairs_ok, P->name + ": decomposition-stairs implication fails");
  }
  return c;
}

// Criterion 5: compiled monoid membership agrees with direct evaluation and
// satisfiability on the whole corpus.
inline Check criterion_oracle_equivalence() {
  Check c;
  std::vector<Tag> tags = {"a"};
  std::size_t corpusSize = 0;
  for (const auto& e : fixtures::kRigidCorpus) {
    ++corpusSize;
    FormulaPtr f = parse_formula(e.text);
    CompileResult r = compile(f, tags);
    auto sos = free_so(f);
    std::size_t disagreements = 0;
    bool anyModel = false;
    for_each_word(tags, 4, 3, [&](const DataWord& w) {
      if (sos.empty()) {
        bool direct = evaluate(f, w, {});
        if (direct) anyModel = true;
        if (r.lang.member({w, {}}) != direct) ++disagreements;
      } else {
        std::vector<std::string> vars(sos.begin(), sos.end());
        std::function<void(std::size_t, AnnotatedWord&, Assignment&)> rec =
            [&](std::size_t i, AnnotatedWord& aw, Assignment& asg) {
              if (i == vars.size()) {
                if (r.lang.member(aw) != evaluate(f, w, asg)) ++disagreements;
                return;
              }
              for (std::size_t mask = 0; mask < (std::size_t{1} << w.size()); ++mask) {
                std::set<std::size_t> U;
                for (std::size_t pp = 0; pp < w.size(); ++pp)
                  if ((mask >> pp) & 1u) U.insert(pp + 1);
                aw.predicates[i] = U;
                asg.so[vars[i]] = U;
                rec(i + 1, aw, asg);
              }
            };
        AnnotatedWord aw{w, std::vector<std::set<std::size_t>>(vars.size())};
        Assignment asg;
        rec(0, aw, asg);
      }
    });
    c.expect(disagreements == 0,
             std::string(e.name) + ": " + std::to_string(disagreements) + " disagreements");
    if (e.sentence) {
      SatResult sat = satisfiable(f, tags);
      if (anyModel) c.expect(sat.satisfiable, std::string(e.name) + ": sat misses a short model");
      if (sat.satisfiable && sat.witness && sat.witness->size() <= 4) {
        bool witnessOk = evaluate(f, *sat.witness, {});
        c.expect(witnessOk, std::string(e.name) + ": witness fails evaluation");
      }
    }
  }
  c.expect(corpusSize >= 12, "corpus smaller than 12 formulas");
  return c;
}

// Criterion 6: rigidity decisions, exact and bounded modes agreeing.
inline Check criterion_rigidity() {
  Check c;
  std::vector<Tag> tags = {"a"};
  RigidityMode bounded;
  bounded.exact = false;
  bounded.boundedLen = 5;
  bounded.boundedVals = 4;
  RigidityVerdict succ = check_rigidity(parse_formula(fixtures::kSuccGuard), "x", "y", false, tags);
  c.expect(succ.status == RigidityStatus::Rigid, "succ should be rigid");
  RigidityVerdict neq = check_rigidity(parse_formula(fixtures::kNeqGuard), "x", "y", false, tags);
  c.expect(neq.status == RigidityStatus::NotRigid, "x != y should not be rigid");
  c.expect(neq.counterexample.has_value(), "missing counterexample for x != y");
  for (const auto& g : fixtures::kGuardCorpus) {
    FormulaPtr phi = parse_formula(g.text);
    RigidityVerdict ve = check_rigidity(phi, "x", "y", false, tags);
    RigidityVerdict vb = check_rigidity(phi, "x", "y", false, tags, bounded);
    c.expect(ve.status == vb.status, std::string(g.name) + ": modes disagree");
  }
  return c;
}

// Criterion 7: grammar rejection of (dagger) and minimal witnesses for
// L_{>=k}.
inline Check criterion_satisfiability() {
  Check c;
  std::vector<Tag> tags = {"a"};
  c.expect(check_grammar(parse_formula(fixtures::kDagger)) == GrammarVerdict::Neither,
           "the dagger formula should be rejected");
  const char* texts[] = {fixtures::kLgeq1, fixtures::kLgeq2, fixtures::kLgeq3};
  for (std::size_t k = 1; k <= 3; ++k) {
    FormulaPtr f = parse_formula(texts[k - 1]);
    SatResult r = satisfiable(f, tags);
    c.expect(r.satisfiable, "L_{>=" + std::to_string(k) + "} should be satisfiable");
    if (r.witness) {
      c.expect(r.witness->size() == k,
               "L_{>=" + std::to_string(k) + "}: witness length " +
                   std::to_string(r.witness->size()));
      c.expect(evaluate(f, *r.witness, {}),
               "L_{>=" + std::to_string(k) + "}: witness fails evaluation");
    } else {
      c.expect(false, "missing witness");
    }
  }
  return c;
}

// Criterion 8: FMA suite.
inline Check criterion_fma() {
  Check c;
  Fma curve = lcurve_fma();
  Fma star = lcurvestar_fma();
  c.expect(is_deterministic(curve), "lcurve should be deterministic");
  c.expect(is_deterministic(star), "lcurvestar should be deterministic");

  auto inCurve = [](const DataWord& w) {
    for (std::size_t i = 2; i <= w.size(); ++i)
      if (w.at(i).value == w.at(1).value) return true;
    return false;
  };
  std::function<bool(const DataWord&, std::size_t)> inStar = [&](const DataWord& w,
                                                                 std::size_t from) {
    if (from > w.size()) return true;
    for (std::size_t end = from + 1; end <= w.size(); ++end) {
      if (w.at(end).value != w.at(from).value) continue;
      bool interiorOk = true;
      for (std::size_t k = from + 1; k < end; ++k)
        if (w.at(k).value == w.at(from).value) interiorOk = false;
      if (interiorOk && inStar(w, end + 1)) return true;
    }
    return false;
  };

  Recognizer L2 = fixture_recognizer(fixtures::kL2);
  Fma fromL2 = from_morphism(L2);
  c.expect(is_deterministic(fromL2), "from_morphism(L2) should be deterministic");

  std::size_t disagreements = 0;
  for_each_word({"a"}, 6, 4, [&](const DataWord& w) {
    if (run(curve, w).accepted != inCurve(w)) ++disagreements;
    if (run(star, w).accepted != inStar(w, 1)) ++disagreements;
    if (run(fromL2, w).accepted != member(L2, w)) ++disagreements;
  });
  c.expect(disagreements == 0, std::to_string(disagreements) + " disagreements");
  return c;
}

// Criterion 9: projectability at every pipeline stage.
inline Check criterion_projectability() {
  Check c;
  std::vector<Tag> tags = {"a"};
  for (const auto& e : fixtures::kRigidCorpus) {
    CompileOptions opts;
    opts.checkGrammar = false;  // covered by criterion 6
    CompileResult r = compile(parse_formula(e.text), tags, opts);
    for (std::size_t i = 0; i < r.stageLangs.size(); ++i) {
      ProjectabilityReport rep = check_projectable(r.stageLangs[i], 4, 3);
      c.expect(rep.ok, std::string(e.name) + " stage " + std::to_string(i) + " (" +
                           r.stages[i].what + ") violates projectability");
      if (!c.ok) return c;
    }
  }
  return c;
}

}  // namespace selftest_detail

inline std::vector<CriterionResult> run_acceptance(const std::string& filter = "") {
  using namespace selftest_detail;
  struct Entry {
    int id;
    std::string name;
    double budget;
    std::function<Check()> fn;
  };
  std::vector<Entry> entries = {
      {1, "l1-monoid-from-lgeq3", 60.0, criterion_l1_monoid},
      {2, "l2-monoid-from-phi-l2", 30.0, criterion_l2_monoid},
      {3, "xsim-five-elements", 1.0, criterion_xsim},
      {4, "green-structure-suite", 60.0, criterion_structure},
      {5, "oracle-equivalence", 300.0, criterion_oracle_equivalence},
      {6, "rigidity-decisions", 120.0, criterion_rigidity},
      {7, "satisfiability-witnesses", 120.0, criterion_satisfiability},
      {8, "fma-suite", 120.0, criterion_fma},
      {9, "projectability-stages", 180.0, criterion_projectability},
  };
  std::vector<CriterionResult> out;
  for (const auto& e : entries) {
    if (!filter.empty() && e.name.find(filter) == std::string::npos) continue;
    CriterionResult r;
    r.id = e.id;
    r.name = e.name;
    r.budget = e.budget;
    auto t0 = std::chrono::steady_clock::now();
    try {
      Check c = e.fn();
      r.pass = c.ok;
      r.detail = c.log.str();
    } catch (const std::exception& ex) {
      r.pass = false;
      r.detail = std::string("exception: ") + ex.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.seconds > r.budget) {
      r.pass = false;
      r.detail += (r.detail.empty() ? "" : "; ") + std::string("over the runtime budget");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dml

#endif

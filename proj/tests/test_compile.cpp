#include <catch2/catch_amalgamated.hpp>

#include "dml/analysis.hpp"
#include "dml/compile.hpp"

using namespace dml;

namespace {

void for_each_word(const std::vector<Tag>& tags, std::size_t maxLen, DataValue maxVal,
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

DataWord plain(std::size_t n) {
  DataWord w;
  for (std::size_t i = 1; i <= n; ++i) w.letters.push_back({static_cast<DataValue>(i), "a"});
  return w;
}

CompileOptions fast_opts() {
  CompileOptions o;
  o.checkGrammar = false;  // grammar checks are covered in the rigidity tests
  return o;
}

}  // namespace

TEST_CASE("compile_atom") {
  std::vector<Tag> tags = {"a"};
  SECTION("x < y") {
    CompiledLanguage c = compile_atom(AtomKind::Less, tags, {"x", "y"});
    DataWord w = plain(6);
    CHECK(c.member({w, {{2}, {5}}}));
    CHECK_FALSE(c.member({w, {{5}, {2}}}));
    CHECK_FALSE(c.member({w, {{3}, {3}}}));
  }
  SECTION("a(x)") {
    CompiledLanguage c = compile_atom(AtomKind::TagIs, tags, {"x"}, "a");
    CHECK(c.member({parse_word("a@1"), {{1}}}));
    CompiledLanguage cb = compile_atom(AtomKind::TagIs, {"a", "b"}, {"x"}, "b");
    CHECK_FALSE(cb.member({parse_word("a@1"), {{1}}}));
    CHECK(cb.member({parse_word("a@1 b@2"), {{2}}}));
  }
  SECTION("x in Y") {
    CompiledLanguage c = compile_atom(AtomKind::In, tags, {"x", "Y"});
    DataWord w = plain(4);
    auto annotated = [&](std::set<std::size_t> xs, std::set<std::size_t> ys) {
      AnnotatedWord aw{w, std::vector<std::set<std::size_t>>(2)};
      for (std::size_t i = 0; i < c.freeVars.size(); ++i)
        aw.predicates[i] = c.freeVars[i] == "x" ? xs : ys;
      return aw;
    };
    CHECK(c.member(annotated({3}, {1, 3})));
    CHECK_FALSE(c.member(annotated({2}, {1, 3})));
  }
  SECTION("atoms are data-free presentations") {
    CompiledLanguage c = compile_atom(AtomKind::Less, tags, {"x", "y"});
    for (auto& o : c.pres->orbits) CHECK(o.arity == 0);
    CHECK(c.pres->validate().ok());
  }
}

TEST_CASE("combine") {
  std::vector<Tag> tags = {"a"};
  CompiledLanguage less = compile_atom(AtomKind::Less, tags, {"x", "y"});
  SECTION("double complement restores the accepting set") {
    CompiledLanguage n2 = combine(BoolOp::Not, combine(BoolOp::Not, less));
    CHECK(n2.accepting == less.accepting);
  }
  SECTION("conjunction with itself is the same language") {
    CompiledLanguage both = combine(BoolOp::And, less, &less);
    for_each_word(tags, 3, 2, [&](const DataWord& w) {
      for (std::size_t x = 1; x <= w.size(); ++x)
        for (std::size_t y = 1; y <= w.size(); ++y) {
          AnnotatedWord aw{w, {{x}, {y}}};
          CHECK(both.member(aw) == less.member(aw));
        }
    });
  }
  SECTION("x < y and y < x is empty") {
    CompiledLanguage gt = compile_atom(AtomKind::Less, tags, {"y", "x"});
    CompiledLanguage gtc = cylindrify(gt, less.freeVars);
    CompiledLanguage both = combine(BoolOp::And, less, &gtc);
    CHECK(is_empty(both.recognizer()));
  }
}

TEST_CASE("cylindrify") {
  std::vector<Tag> tags = {"a"};
  CompiledLanguage first = compile_atom(AtomKind::First, tags, {"x"});
  CompiledLanguage cyl = cylindrify(first, {"x", "z"});
  SECTION("membership ignores the new track") {
    for_each_word(tags, 4, 2, [&](const DataWord& w) {
      for (std::size_t x = 1; x <= w.size(); ++x) {
        AnnotatedWord base{w, {{x}}};
        bool expected = first.member(base);
        // any annotation of the dummy track leaves membership unchanged
        for (std::size_t mask = 0; mask < (std::size_t{1} << w.size()); ++mask) {
          std::set<std::size_t> Z;
          for (std::size_t p = 0; p < w.size(); ++p)
            if ((mask >> p) & 1u) Z.insert(p + 1);
          CHECK(cyl.member({w, {{x}, Z}}) == expected);
        }
      }
    });
  }
  SECTION("empty language stays empty") {
    CompiledLanguage none = compile_atom(AtomKind::False, tags, {});
    CompiledLanguage c = cylindrify(none, {"u"});
    CHECK(is_empty(c.recognizer()));
  }
}

TEST_CASE("powerset product rule") {
  auto P = load_monoid_text(fixtures::kL2).presentation;
  Term s = P->make_term("s", {1});
  Term t = P->make_term("p", {1, 2});
  SECTION("singletons multiply pointwise") {
    PowersetProduct r = powerset_product(*P, {s}, {t});
    REQUIRE(r.set.size() == 1);
    CHECK(r.set[0] == P->product(s, t));
    CHECK_FALSE(r.collapsed);
  }
  SECTION("the empty set is a null") {
    PowersetProduct r = powerset_product(*P, {}, {s, t});
    CHECK(r.set.empty());
    CHECK_FALSE(r.collapsed);
  }
  SECTION("orbit-equal but distinct products collapse") {
    // s(1).s(2) = p(1,2) and s(1).s(3) = p(1,3): same orbit, different
    // elements, so {s(1)} . {s(2), s(3)} collapses to the empty set.
    PowersetProduct r =
        powerset_product(*P, {P->make_term("s", {1})},
                         {P->make_term("s", {2}), P->make_term("s", {3})});
    CHECK(r.collapsed);
    CHECK(r.set.empty());
  }
}

TEST_CASE("powerset_exists compiles existential quantification") {
  std::vector<Tag> tags = {"a"};
  // exists y. succ(x,y) -- via the pipeline pieces
  CompiledLanguage succ = compile_atom(AtomKind::Succ, tags, {"x", "y"});
  CompiledLanguage sy = cylindrify(compile_atom(AtomKind::Singleton, tags, {"y"}), succ.freeVars);
  CompiledLanguage conj = combine(BoolOp::And, succ, &sy);
  CompiledLanguage ex = powerset_exists(conj, "y");
  DataWord w = plain(3);
  CHECK(ex.member({w, {{2}}}));
  CHECK(ex.member({w, {{1}}}));
  CHECK_FALSE(ex.member({w, {{3}}}));  // the last position has no successor
  CHECK(ex.freeVars == std::vector<std::string>{"x"});
}

TEST_CASE("xsim monoid matches the five-element structure") {
  auto M2 = xsim_monoid();
  auto p = [&](DataValue d) { return M2->make_term("p", {d}); };
  auto q = [&](DataValue d) { return M2->make_term("q", {d}); };
  Term o = M2->make_term("o", {});
  Term r = M2->make_term("r", {});
  Term s = M2->make_term("s", {});
  CHECK(M2->product(p(1), q(1)) == r);
  CHECK(M2->product(p(1), q(2)) == s);
  CHECK(M2->product(q(1), p(1)) == r);
  CHECK(M2->product(q(2), p(1)) == s);
  // r absorbs into s against everything except the identity
  for (const Term& t : {p(1), q(1), r, s}) {
    CHECK(M2->product(r, t) == s);
    CHECK(M2->product(t, r) == s);
  }
  CHECK(M2->product(r, o) == r);
  CHECK(M2->product(o, r) == r);
  for (const Term& t : {o, p(1), q(1), r, s}) {
    CHECK(M2->product(s, t) == s);
    CHECK(M2->product(t, s) == s);
  }
}

TEST_CASE("guarded_test on the successor guard") {
  std::vector<Tag> tags = {"a"};
  CompiledLanguage succ = compile_atom(AtomKind::Succ, tags, {"x", "y"});
  SECTION("equal polarity") {
    CompiledLanguage t = guarded_test(succ, "x", "y", false);
    DataWord w = parse_word("a@1 a@1");
    CHECK(t.member({w, {{1}, {2}}}));
    DataWord v = parse_word("a@1 a@2");
    CHECK_FALSE(t.member({v, {{1}, {2}}}));
    // wrong shapes are rejected
    CHECK_FALSE(t.member({w, {{2}, {1}}}));
    CHECK_FALSE(t.member({w, {{1}, {}}}));
    CHECK_FALSE(t.member({w, {{1, 2}, {2}}}));
  }
  SECTION("negative polarity accepts exactly the other words") {
    CompiledLanguage eq = guarded_test(succ, "x", "y", false);
    CompiledLanguage ne = guarded_test(succ, "x", "y", true);
    for_each_word(tags, 3, 3, [&](const DataWord& w) {
      for (std::size_t x = 1; x <= w.size(); ++x)
        for (std::size_t y = 1; y <= w.size(); ++y) {
          AnnotatedWord aw{w, {{x}, {y}}};
          bool guardHolds = y == x + 1;
          CHECK(eq.member(aw) == (guardHolds && w.at(x).value == w.at(y).value));
          CHECK(ne.member(aw) == (guardHolds && w.at(x).value != w.at(y).value));
        }
    });
  }
  SECTION("stage-2 output is 0-reduced on enumerated words") {
    ReducedGuard red = guarded_test_reduced(succ, "x", "y");
    const Presentation& P = *red.lang.pres;
    auto isNull = [&](const Term& t) {
      return red.nullOrbit && P.orbit(t.orbit).name == *red.nullOrbit;
    };
    for_each_word(tags, 4, 3, [&](const DataWord& w) {
      // distinct singleton x-markings never share a non-null image
      for (std::size_t x1 = 1; x1 <= w.size(); ++x1)
        for (std::size_t x2 = x1 + 1; x2 <= w.size(); ++x2) {
          Term a = evaluate(red.lang.morphism, expand({w, {{x1}, {}}}));
          Term b = evaluate(red.lang.morphism, expand({w, {{x2}, {}}}));
          if (a == b) CHECK(isNull(a));
          Term c = evaluate(red.lang.morphism, expand({w, {{}, {x1}}}));
          Term d = evaluate(red.lang.morphism, expand({w, {{}, {x2}}}));
          if (c == d) CHECK(isNull(c));
        }
    });
  }
}

TEST_CASE("compiled corpus agrees with direct evaluation") {
  std::vector<Tag> tags = {"a"};
  for (const auto& e : fixtures::kRigidCorpus) {
    if (std::string(e.name) == "first_tag_a" || std::string(e.name) == "marked_a") continue;
    FormulaPtr f = parse_formula(e.text);
    CAPTURE(e.name);
    CompileResult r = compile(f, tags, fast_opts());
    auto sos = free_so(f);
    for_each_word(tags, 4, 3, [&](const DataWord& w) {
      if (sos.empty()) {
        CHECK(r.lang.member({w, {}}) == evaluate(f, w, {}));
      } else {
        // enumerate annotations for the free second-order variables
        std::vector<std::string> vars(sos.begin(), sos.end());
        std::function<void(std::size_t, AnnotatedWord&, Assignment&)> rec =
            [&](std::size_t i, AnnotatedWord& aw, Assignment& asg) {
              if (i == vars.size()) {
                CHECK(r.lang.member(aw) == evaluate(f, w, asg));
                return;
              }
              for (std::size_t mask = 0; mask < (std::size_t{1} << w.size()); ++mask) {
                std::set<std::size_t> U;
                for (std::size_t p = 0; p < w.size(); ++p)
                  if ((mask >> p) & 1u) U.insert(p + 1);
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
  }
}

TEST_CASE("tag and free-variable formulas compile") {
  std::vector<Tag> tags = {"a", "b"};
  SECTION("first_tag_a over a two-letter alphabet") {
    FormulaPtr f = parse_formula(fixtures::kFirstTagA);
    CompileResult r = compile(f, tags, fast_opts());
    for_each_word(tags, 3, 2, [&](const DataWord& w) {
      CHECK(r.lang.member({w, {}}) == evaluate(f, w, {}));
    });
  }
  SECTION("marked_a keeps its free variable as a track") {
    FormulaPtr f = parse_formula(fixtures::kMarkedA);
    CompileResult r = compile(f, tags, fast_opts());
    REQUIRE(r.lang.freeVars == std::vector<std::string>{"Y"});
    for_each_word(tags, 3, 2, [&](const DataWord& w) {
      for (std::size_t mask = 0; mask < (std::size_t{1} << w.size()); ++mask) {
        std::set<std::size_t> U;
        for (std::size_t p = 0; p < w.size(); ++p)
          if ((mask >> p) & 1u) U.insert(p + 1);
        Assignment asg;
        asg.so["Y"] = U;
        CHECK(r.lang.member({w, {U}}) == evaluate(f, w, asg));
      }
    });
  }
}

TEST_CASE("compile rejects non-conformant input") {
  CHECK_THROWS_AS(compile(parse_formula(fixtures::kDagger), {"a"}), DmlError);
  CHECK_THROWS_AS(
      compile(parse_formula("E x. E y. rigid[x != y](x,y){x ~ y}"), {"a"}),
      DmlError);
}

TEST_CASE("compile of false is empty") {
  CompileResult r = compile(parse_formula("false"), {"a"}, fast_opts());
  CHECK(is_empty(r.lang.recognizer()));
}

TEST_CASE("projectability at every pipeline stage") {
  std::vector<Tag> tags = {"a"};
  for (const char* text : {fixtures::kPhiL2, fixtures::kLgeq2, fixtures::kConsecEq}) {
    CompileResult r = compile(parse_formula(text), tags, fast_opts());
    for (std::size_t i = 0; i < r.stageLangs.size(); ++i) {
      CAPTURE(text, i, r.stages[i].what);
      CHECK(check_projectable(r.stageLangs[i], 3, 2).ok);
    }
  }
}

TEST_CASE("powerset element cardinality stays below the orbit count") {
  // reachable powerset elements of the exists stage never hold more members
  // than the base monoid has orbits
  std::vector<Tag> tags = {"a"};
  CompiledLanguage succ = compile_atom(AtomKind::Succ, tags, {"x", "y"});
  CompiledLanguage sy = cylindrify(compile_atom(AtomKind::Singleton, tags, {"y"}), succ.freeVars);
  CompiledLanguage conj = combine(BoolOp::And, succ, &sy);
  std::size_t baseOrbits = conj.pres->orbits.size();
  CompiledLanguage ex = powerset_exists(conj, "y");
  for_each_word(tags, 4, 3, [&](const DataWord& w) {
    for (std::size_t x = 1; x <= w.size(); ++x) {
      // the image of any annotated word under the powerset morphism is a
      // set of base elements; sample it through the base morphism directly
      std::set<Term> members;
      for (std::size_t mask = 0; mask < (std::size_t{1} << w.size()); ++mask) {
        std::set<std::size_t> U;
        for (std::size_t p = 0; p < w.size(); ++p)
          if ((mask >> p) & 1u) U.insert(p + 1);
        members.insert(evaluate(conj.morphism, expand({w, {{x}, U}})));
      }
      std::set<Term> orbits;
      for (const Term& t : members) orbits.insert(canonical_element(*conj.pres, t));
      CHECK(orbits.size() <= baseOrbits);
    }
  });
}

TEST_CASE("aperiodicity of compiled first-order corpus quotients") {
  std::vector<Tag> tags = {"a"};
  for (const char* text : {fixtures::kPhiL2, fixtures::kLgeq2, fixtures::kConsecEq,
                           fixtures::kAllConsecNeq}) {
    CompileResult r = compile(parse_formula(text), tags, fast_opts());
    QuotientResult q = syntactic_quotient(r.lang.recognizer());
    CAPTURE(text);
    CHECK(is_aperiodic(*q.recognizer.morphism.target));
  }
}

TEST_CASE("compiled quotients match the worked examples") {
  std::vector<Tag> tags = {"a"};
  SECTION("phi_L2 has three orbits") {
    CompileResult r = compile(parse_formula(fixtures::kPhiL2), tags, fast_opts());
    QuotientResult q = syntactic_quotient(r.lang.recognizer());
    CHECK(q.recognizer.morphism.target->orbits.size() == 3);
  }
  SECTION("L_{>=3} yields the L1 monoid with arities 0,1,2,0") {
    CompileResult r = compile(parse_formula(fixtures::kLgeq3), tags, fast_opts());
    QuotientResult q = syntactic_quotient(r.lang.recognizer());
    const Presentation& P = *q.recognizer.morphism.target;
    REQUIRE(P.orbits.size() == 4);
    std::multiset<int> arities;
    for (auto& o : P.orbits) arities.insert(o.arity);
    CHECK(arities == std::multiset<int>{0, 0, 1, 2});
  }
}

TEST_CASE("quotient collapses a redundantly compiled recognizer") {
  // Compiling without stage quotients leaves extra distinguishable states;
  // the syntactic quotient must still land on the three-orbit monoid.
  CompileOptions opts;
  opts.checkGrammar = false;
  opts.quotientStages = false;
  CompileResult redundant = compile(parse_formula(fixtures::kPhiL2), {"a"}, opts);
  REQUIRE(redundant.lang.pres->orbits.size() > 3);
  QuotientResult q = syntactic_quotient(redundant.lang.recognizer());
  CHECK(q.recognizer.morphism.target->orbits.size() == 3);
  for_each_word({"a"}, 4, 3, [&](const DataWord& w) {
    bool expect = !w.empty() && w.letters.front().value == w.letters.back().value;
    CHECK(member(q.recognizer, w) == expect);
  });
}

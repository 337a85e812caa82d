#include <catch2/catch_amalgamated.hpp>

#include "dml/fixtures.hpp"
#include "dml/logic.hpp"

using namespace dml;

namespace {

// ---------------------------------------------------------------------------
// Reference evaluator, independently coded: computes the satisfying set of
// assignments bottom-up, representing first-order values as positions and
// second-order values as bitmasks over the word's domain.

struct RefAssign {
  std::map<std::string, std::size_t> fo;
  std::map<std::string, unsigned> so;  // bitmask, bit p-1 = position p
};

std::vector<RefAssign> all_assignments(const std::set<std::string>& fos,
                                       const std::set<std::string>& sos, std::size_t n) {
  std::vector<RefAssign> out{{}};
  for (const auto& v : fos) {
    std::vector<RefAssign> next;
    for (auto& a : out)
      for (std::size_t p = 1; p <= n; ++p) {
        RefAssign b = a;
        b.fo[v] = p;
        next.push_back(b);
      }
    out = next;
  }
  for (const auto& v : sos) {
    std::vector<RefAssign> next;
    for (auto& a : out)
      for (unsigned m = 0; m < (1u << n); ++m) {
        RefAssign b = a;
        b.so[v] = m;
        next.push_back(b);
      }
    out = next;
  }
  return out;
}

bool ref_holds(const FormulaPtr& f, const DataWord& w, const RefAssign& a) {
  using K = NodeKind;
  auto P = [&](const std::string& v) { return a.fo.at(v); };
  switch (f->kind) {
    case K::True:
      return true;
    case K::False:
      return false;
    case K::Less:
      return P(f->v1) < P(f->v2);
    case K::Eq:
      return P(f->v1) == P(f->v2);
    case K::Succ:
      return P(f->v2) == P(f->v1) + 1;
    case K::First:
      return P(f->v1) == 1;
    case K::Last:
      return P(f->v1) == w.size();
    case K::TagAtom:
      return w.at(P(f->v1)).tag == f->tag;
    case K::In:
      return (a.so.at(f->v2) >> (P(f->v1) - 1)) & 1u;
    case K::Not:
      return !ref_holds(f->a, w, a);
    case K::And:
      return ref_holds(f->a, w, a) && ref_holds(f->b, w, a);
    case K::Or:
      return ref_holds(f->a, w, a) || ref_holds(f->b, w, a);
    case K::Implies:
      return !ref_holds(f->a, w, a) || ref_holds(f->b, w, a);
    case K::Iff:
      return ref_holds(f->a, w, a) == ref_holds(f->b, w, a);
    case K::ExistsFO:
    case K::ForallFO: {
      std::size_t n = w.size();
      bool ex = f->kind == K::ExistsFO;
      for (std::size_t p = 1; p <= n; ++p) {
        RefAssign b = a;
        b.fo[f->v1] = p;
        if (ref_holds(f->a, w, b) == ex) return ex;
      }
      return !ex;
    }
    case K::ExistsSO:
    case K::ForallSO: {
      bool ex = f->kind == K::ExistsSO;
      for (unsigned m = 0; m < (1u << w.size()); ++m) {
        RefAssign b = a;
        b.so[f->v1] = m;
        if (ref_holds(f->a, w, b) == ex) return ex;
      }
      return !ex;
    }
    case K::RigidTest: {
      if (!ref_holds(f->a, w, a)) return false;
      bool same = w.at(P(f->v1)).value == w.at(P(f->v2)).value;
      return f->neq ? !same : same;
    }
    case K::SemiRigidTest: {
      if (!ref_holds(f->a, w, a) || !ref_holds(f->b, w, a)) return false;
      bool same = w.at(P(f->v2)).value == w.at(P(f->v3)).value;
      return f->neq ? !same : same;
    }
    case K::RawTest: {
      bool same = w.at(P(f->v1)).value == w.at(P(f->v2)).value;
      return f->neq ? !same : same;
    }
  }
  return false;
}

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

std::size_t count_distinct(const DataWord& w) {
  std::set<DataValue> s;
  for (auto& l : w.letters) s.insert(l.value);
  return s.size();
}

}  // namespace

TEST_CASE("parser") {
  SECTION("L_{>=2} parses to a rigid test") {
    FormulaPtr f = parse_formula("E x. E y. rigid[succ(x,y)]{x !~ y}");
    REQUIRE(f->kind == NodeKind::ExistsFO);
    REQUIRE(f->a->kind == NodeKind::ExistsFO);
    const Formula& t = *f->a->a;
    CHECK(t.kind == NodeKind::RigidTest);
    CHECK(t.neq);
    CHECK(t.v1 == "x");
    CHECK(t.v2 == "y");
    CHECK(t.a->kind == NodeKind::Succ);
  }
  SECTION("the dagger formula parses with a raw test") {
    FormulaPtr f = parse_formula(fixtures::kDagger);
    CHECK(f->kind == NodeKind::ForallFO);
    CHECK_FALSE(data_test_free(f));
  }
  SECTION("trivial existential") {
    FormulaPtr f = parse_formula("E x. true");
    CHECK(f->kind == NodeKind::ExistsFO);
    CHECK(f->a->kind == NodeKind::True);
  }
  SECTION("comma-separated quantifier lists") {
    FormulaPtr f = parse_formula("E x, y. x < y");
    CHECK(f->kind == NodeKind::ExistsFO);
    CHECK(f->a->kind == NodeKind::ExistsFO);
  }
  SECTION("errors carry positions") {
    CHECK_THROWS_WITH(parse_formula("E x."), Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_AS(parse_formula("E x. x <"), DmlError);
    CHECK_THROWS_AS(parse_formula("rigid[succ(x,y)](x,z){x ~ y}"), DmlError);
    CHECK_THROWS_AS(parse_formula("x ~ y y"), DmlError);
  }
  SECTION("whole corpus parses and round-trips through to_string") {
    for (const auto& e : fixtures::kRigidCorpus) {
      FormulaPtr f = parse_formula(e.text);
      FormulaPtr g = parse_formula(to_string(f));
      CHECK(to_string(f) == to_string(g));
    }
  }
  SECTION("free variables") {
    FormulaPtr f = parse_formula(fixtures::kMarkedA);
    CHECK(free_fo(f).empty());
    CHECK(free_so(f) == std::set<std::string>{"Y"});
    FormulaPtr g = parse_formula(fixtures::kSuccGuard);
    CHECK(free_fo(g) == std::set<std::string>{"x", "y"});
  }
}

TEST_CASE("evaluate basics") {
  FormulaPtr phiL2 = parse_formula(fixtures::kPhiL2);
  CHECK(evaluate(phiL2, parse_word("a@1 a@2 a@1"), {}));
  CHECK_FALSE(evaluate(phiL2, parse_word("a@1 a@2"), {}));
  CHECK_FALSE(evaluate(parse_formula("E x. true"), DataWord{}, {}));
  CHECK(evaluate(parse_formula("E x. true"), parse_word("a@5"), {}));
}

TEST_CASE("word-too-long guard for second-order enumeration") {
  DataWord w;
  for (int i = 0; i < 20; ++i) w.letters.push_back({1, "a"});
  EvalOptions opt;
  opt.maxWordLen = 18;
  CHECK_THROWS_WITH(evaluate(parse_formula(fixtures::kEvenLength), w, {}, opt),
                    Catch::Matchers::ContainsSubstring("word-too-long"));
}

TEST_CASE("evaluate agrees with the set-theoretic reference evaluator") {
  for (const auto& e : fixtures::kRigidCorpus) {
    FormulaPtr f = parse_formula(e.text);
    auto fos = free_fo(f);
    auto sos = free_so(f);
    for_each_word({"a", "b"}, 4, 3, [&](const DataWord& w) {
      if (!e.sentence && w.empty()) return;
      for (const RefAssign& ra : all_assignments(fos, sos, w.size())) {
        Assignment asg;
        asg.fo = ra.fo;
        for (auto& [v, m] : ra.so) {
          std::set<std::size_t> U;
          for (std::size_t p = 1; p <= w.size(); ++p)
            if ((m >> (p - 1)) & 1u) U.insert(p);
          asg.so[v] = U;
        }
        CAPTURE(e.name, format_word(w));
        CHECK(evaluate(f, w, asg) == ref_holds(f, w, ra));
      }
    });
  }
}

TEST_CASE("evaluate is renaming-invariant on sentences") {
  std::vector<FormulaPtr> sentences;
  for (const auto& e : fixtures::kRigidCorpus)
    if (e.sentence) sentences.push_back(parse_formula(e.text));
  for_each_word({"a"}, 4, 3, [&](const DataWord& w) {
    // swap values 1 and 2, and a cycle through 4
    for (const Renaming& tau :
         {Renaming::swap(1, 2), Renaming::from_pairs({{1, 2}, {2, 4}, {4, 1}})}) {
      DataWord v = act_word(tau, w);
      for (const auto& f : sentences) CHECK(evaluate(f, w, {}) == evaluate(f, v, {}));
    }
  });
}

TEST_CASE("language semantics spot checks") {
  FormulaPtr l3 = parse_formula(fixtures::kLgeq3);
  for_each_word({"a"}, 4, 3, [&](const DataWord& w) {
    CAPTURE(format_word(w));
    CHECK(evaluate(l3, w, {}) == (count_distinct(w) >= 3));
  });
  FormulaPtr l2 = parse_formula(fixtures::kLgeq2);
  for_each_word({"a"}, 4, 3, [&](const DataWord& w) {
    CHECK(evaluate(l2, w, {}) == (count_distinct(w) >= 2));
  });
  FormulaPtr noconsec = parse_formula(fixtures::kAllConsecNeq);
  for_each_word({"a"}, 4, 3, [&](const DataWord& w) {
    bool expect = true;
    for (std::size_t p = 1; p + 1 <= w.size(); ++p)
      if (w.at(p).value == w.at(p + 1).value) expect = false;
    CHECK(evaluate(noconsec, w, {}) == expect);
  });
  FormulaPtr even = parse_formula(fixtures::kEvenLength);
  for_each_word({"a"}, 5, 2, [&](const DataWord& w) {
    CHECK(evaluate(even, w, {}) == (w.size() % 2 == 0));
  });
}

TEST_CASE("substitution and rigidify") {
  FormulaPtr succ = parse_formula(fixtures::kSuccGuard);
  SECTION("substitute renames free variables only") {
    FormulaPtr s = substitute_fo(succ, {{"x", "p"}, {"y", "q"}});
    CHECK(to_string(s) == "succ(p,q)");
    FormulaPtr quant = parse_formula("E x. x < y");
    FormulaPtr t = substitute_fo(quant, {{"x", "p"}, {"y", "q"}});
    CHECK(to_string(t) == "(E x. x < q)");
  }

  SECTION("rigidify(succ) is equivalent to succ on small words") {
    FormulaPtr r = rigidify(succ, "x", "y");
    for_each_word({"a"}, 5, 2, [&](const DataWord& w) {
      for (std::size_t x = 1; x <= w.size(); ++x)
        for (std::size_t y = 1; y <= w.size(); ++y) {
          Assignment asg;
          asg.fo = {{"x", x}, {"y", y}};
          CHECK(evaluate(r, w, asg) == evaluate(succ, w, asg));
        }
    });
  }

  SECTION("rigidify(x != y) empties the relation on words of length >= 3") {
    FormulaPtr neq = parse_formula(fixtures::kNeqGuard);
    FormulaPtr r = rigidify(neq, "x", "y");
    DataWord w = parse_word("a@1 a@2 a@3");
    for (std::size_t x = 1; x <= 3; ++x)
      for (std::size_t y = 1; y <= 3; ++y) {
        Assignment asg;
        asg.fo = {{"x", x}, {"y", y}};
        CHECK_FALSE(evaluate(r, w, asg));
      }
    // on a 2-letter word the relation is already a partial bijection
    DataWord v = parse_word("a@1 a@2");
    Assignment asg;
    asg.fo = {{"x", std::size_t{1}}, {"y", std::size_t{2}}};
    CHECK(evaluate(r, v, asg));
  }

  SECTION("rigidify(false) stays empty") {
    FormulaPtr r = rigidify(mk::fls(), "x", "y");
    DataWord w = parse_word("a@1 a@2");
    Assignment asg;
    asg.fo = {{"x", std::size_t{1}}, {"y", std::size_t{2}}};
    CHECK_FALSE(evaluate(r, w, asg));
  }
}

TEST_CASE("normalize_tests") {
  SECTION("L_{>=2} yields one descriptor") {
    auto norm = normalize_tests(parse_formula(fixtures::kLgeq2));
    CHECK(norm.tests.size() == 1);
    CHECK(data_test_free(norm.core));
    CHECK(norm.tests[0].fromRigid);
    CHECK(norm.tests[0].neq);
  }
  SECTION("data-test-free formulas are unchanged") {
    FormulaPtr f = parse_formula(fixtures::kEvenLength);
    auto norm = normalize_tests(f);
    CHECK(norm.tests.empty());
    CHECK(to_string(norm.core) == to_string(f));
  }
  SECTION("nested guards produce innermost-first descriptors") {
    auto norm = normalize_tests(parse_formula(fixtures::kLgeq3));
    REQUIRE(norm.tests.size() == 4);
    // the three inner tests come before the outer one, which guards on x,y
    CHECK(norm.tests[3].x == "x");
    CHECK(norm.tests[3].y == "y");
    for (int i = 0; i < 3; ++i) CHECK(data_test_free(norm.tests[static_cast<std::size_t>(i)].alpha));
    CHECK(data_test_free(norm.tests[3].alpha));
  }
  SECTION("two-test sentence yields two descriptors") {
    auto norm = normalize_tests(parse_formula(fixtures::kTwoTest));
    CHECK(norm.tests.size() == 2);
  }
  SECTION("raw tests are rejected") {
    CHECK_THROWS_AS(normalize_tests(parse_formula(fixtures::kDagger)), DmlError);
  }
  SECTION("the core together with correct predicate markings matches direct evaluation") {
    // Equip $c predicates with their defining truth values and compare.
    for (const char* text : {fixtures::kLgeq2, fixtures::kConsecEq, fixtures::kTwoTest}) {
      FormulaPtr f = parse_formula(text);
      auto norm = normalize_tests(f);
      for_each_word({"a"}, 4, 3, [&](const DataWord& w) {
        Assignment asg;
        for (const auto& d : norm.tests) {
          std::set<std::size_t> marks;
          for (std::size_t x = 1; x <= w.size(); ++x) {
            bool holds = false;
            for (std::size_t y = 1; y <= w.size() && !holds; ++y)
              for (std::size_t z = 1; z <= w.size() && !holds; ++z) {
                Assignment inner = asg;
                inner.fo[d.x] = x;
                inner.fo[d.y] = y;
                inner.fo[d.z] = z;
                if (evaluate(d.alpha, w, inner) && evaluate(d.beta, w, inner) &&
                    w.at(y).value == w.at(z).value)
                  holds = true;
              }
            if (holds) marks.insert(x);
          }
          asg.so[d.predicate] = marks;
        }
        CHECK(evaluate(norm.core, w, asg) == evaluate(f, w, {}));
      });
    }
  }
}

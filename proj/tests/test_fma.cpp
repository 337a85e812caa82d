#include <catch2/catch_amalgamated.hpp>

#include "dml/fixtures.hpp"
#include "dml/fma.hpp"
#include "dml/io.hpp"

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

// Brute-force language definitions, independent of the automata.
bool in_lcurve(const DataWord& w) {
  if (w.size() < 2) return false;
  for (std::size_t i = 2; i <= w.size(); ++i)
    if (w.at(i).value == w.at(1).value) return true;
  return false;
}

// Declarative phase decomposition: the word splits into phases of length at
// least two whose first and last values agree and whose interior avoids the
// opening value.
bool in_lcurvestar(const DataWord& w, std::size_t from = 1) {
  if (from > w.size()) return true;
  for (std::size_t end = from + 1; end <= w.size(); ++end) {
    if (w.at(end).value != w.at(from).value) continue;
    bool interiorOk = true;
    for (std::size_t k = from + 1; k < end; ++k)
      if (w.at(k).value == w.at(from).value) interiorOk = false;
    if (interiorOk && in_lcurvestar(w, end + 1)) return true;
  }
  return false;
}

Recognizer load_rec(const char* text) {
  auto l = load_monoid_text(text);
  Recognizer r;
  r.morphism = *l.morphism;
  r.accepting = l.accepting;
  return r;
}

}  // namespace

TEST_CASE("step") {
  Fma a = lcurve_fma();
  SECTION("the first letter is stored") {
    Config init = a.initial_configs().at(0);
    auto next = step(a, init, {5, "a"});
    REQUIRE(next.size() == 1);
    CHECK(next[0].state == a.state_id("st"));
    CHECK(next[0].registers == std::vector<DataValue>{5});
  }
  SECTION("a reoccurrence moves to the accepting sink") {
    Config stored{a.state_id("st"), {5}};
    auto next = step(a, stored, {5, "a"});
    REQUIRE(next.size() == 1);
    CHECK(next[0].state == a.state_id("acc"));
  }
  SECTION("other values keep scanning") {
    Config stored{a.state_id("st"), {5}};
    auto next = step(a, stored, {7, "a"});
    REQUIRE(next.size() == 1);
    CHECK(next[0].state == a.state_id("st"));
    CHECK(next[0].registers == std::vector<DataValue>{5});
  }
}

TEST_CASE("run") {
  Fma a = lcurve_fma();
  SECTION("accepting run with trace") {
    RunReport r = run(a, parse_word("a@5 a@7 a@5"));
    CHECK(r.accepted);
    CHECK(r.run_count == 1);
    REQUIRE(r.trace);
    CHECK(r.trace->size() == 4);  // initial plus one configuration per letter
  }
  SECTION("rejection") {
    RunReport r = run(a, parse_word("a@5 a@7 a@8"));
    CHECK_FALSE(r.accepted);
    CHECK(r.run_count == 0);
  }
  SECTION("the empty word is accepted iff an initial state is final") {
    CHECK_FALSE(run(a, DataWord{}).accepted);
    CHECK(run(lcurvestar_fma(), DataWord{}).accepted);
  }
}

TEST_CASE("fixture automata match their brute-force definitions") {
  Fma curve = lcurve_fma();
  Fma star = lcurvestar_fma();
  for_each_word({"a"}, 6, 4, [&](const DataWord& w) {
    CAPTURE(format_word(w));
    CHECK(run(curve, w).accepted == in_lcurve(w));
    CHECK(run(star, w).accepted == in_lcurvestar(w));
  });
}

TEST_CASE("acceptance is equivariant") {
  Fma star = lcurvestar_fma();
  for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
    for (const Renaming& tau :
         {Renaming::swap(1, 2), Renaming::from_pairs({{1, 3}, {3, 2}, {2, 1}})}) {
      CHECK(run(star, w).accepted == run(star, act_word(tau, w)).accepted);
    }
  });
}

TEST_CASE("is_deterministic") {
  CHECK(is_deterministic(lcurve_fma()));
  CHECK(is_deterministic(lcurvestar_fma()));
  SECTION("disjoint union has two initials") {
    Fma u = disjoint_union(lcurve_fma(), lcurve_fma());
    CHECK_FALSE(is_deterministic(u));
  }
  SECTION("conflicting transitions are nondeterministic") {
    Fma a = lcurve_fma();
    a.transitions.push_back({a.state_id("st"), "a", {true, 0}, a.state_id("acc"), {}});
    CHECK_FALSE(is_deterministic(a));
  }
  SECTION("deterministic automata have at most one run") {
    for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
      CHECK(run(lcurve_fma(), w, 5).run_count <= 1);
      CHECK(run(lcurvestar_fma(), w, 5).run_count <= 1);
    });
  }
}

TEST_CASE("product") {
  Fma curve = lcurve_fma();
  SECTION("intersection with the full language") {
    Fma full = load_fma_text(
        "fma full\ntags a\nstate s/0 initial final\ntrans s() a@fresh -> s()\n");
    Fma both = product(curve, full, FmaProductMode::Intersection);
    for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
      CHECK(run(both, w).accepted == run(curve, w).accepted);
    });
  }
  SECTION("intersection with the complement is empty") {
    Fma comp = complement_deterministic(curve);
    Fma none = product(curve, comp, FmaProductMode::Intersection);
    for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
      CHECK_FALSE(run(none, w).accepted);
    });
  }
  SECTION("union with the empty language") {
    Fma empty = load_fma_text("fma none\ntags a\nstate s/0 initial\ntrans s() a@fresh -> s()\n");
    Fma u = product(empty, curve, FmaProductMode::Union);
    for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
      CHECK(run(u, w).accepted == run(curve, w).accepted);
    });
  }
  SECTION("union and intersection against the star automaton") {
    Fma star = lcurvestar_fma();
    Fma u = product(curve, star, FmaProductMode::Union);
    Fma i = product(curve, star, FmaProductMode::Intersection);
    for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
      bool a = run(curve, w).accepted, b = run(star, w).accepted;
      CHECK(run(u, w).accepted == (a || b));
      CHECK(run(i, w).accepted == (a && b));
    });
  }
}

TEST_CASE("complement of a deterministic automaton") {
  Fma curve = lcurve_fma();
  Fma comp = complement_deterministic(curve);
  for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
    CHECK(run(comp, w).accepted == !run(curve, w).accepted);
  });
  Fma nondet = disjoint_union(curve, curve);
  CHECK_THROWS_AS(complement_deterministic(nondet), DmlError);
}

TEST_CASE("from_morphism") {
  SECTION("L2 recognizer becomes an equivalent deterministic automaton") {
    Recognizer R = load_rec(fixtures::kL2);
    Fma a = from_morphism(R);
    CHECK(is_deterministic(a));
    CHECK(run(a, parse_word("a@1 a@2 a@1")).accepted);
    CHECK_FALSE(run(a, parse_word("a@1 a@2")).accepted);
    for_each_word({"a"}, 5, 4, [&](const DataWord& w) {
      CAPTURE(format_word(w));
      CHECK(run(a, w).accepted == member(R, w));
    });
  }
  SECTION("L1 recognizer") {
    Recognizer R = load_rec(fixtures::kL1);
    Fma a = from_morphism(R);
    CHECK(is_deterministic(a));
    for_each_word({"a"}, 5, 4, [&](const DataWord& w) {
      CHECK(run(a, w).accepted == member(R, w));
    });
  }
  SECTION("identity-only recognizer gives a one-state automaton") {
    auto l = load_monoid_text(
        "monoid One\nsupport 2\norbit e/0 identity\nletter a = e()\naccept e\n");
    Recognizer R{*l.morphism, l.accepting};
    Fma a = from_morphism(R);
    CHECK(a.states.size() == 1);
    CHECK(run(a, parse_word("a@1 a@2")).accepted);
  }
}

TEST_CASE("unambiguity_bounded") {
  SECTION("the fixtures are unambiguous") {
    CHECK(unambiguity_bounded(lcurve_fma(), 5, 4).unambiguous);
    CHECK(unambiguity_bounded(lcurvestar_fma(), 5, 4).unambiguous);
  }
  SECTION("a duplicated transition produces a counterexample") {
    Fma a = lcurve_fma();
    // a second way to accept: skip the first letter and match from the second
    a.transitions.push_back({a.state_id("s0"), "a", {true, 0}, a.state_id("s0"), {}});
    UnambiguityVerdict v = unambiguity_bounded(a, 4, 3);
    REQUIRE_FALSE(v.unambiguous);
    REQUIRE(v.counterexample);
    CHECK(run(a, *v.counterexample, 3).run_count >= 2);
  }
}

TEST_CASE("fma text format") {
  Fma a = lcurvestar_fma();
  std::string text = save_fma_text(a);
  Fma b = load_fma_text(text);
  for_each_word({"a"}, 5, 3, [&](const DataWord& w) {
    CHECK(run(a, w).accepted == run(b, w).accepted);
  });
  SECTION("errors carry line numbers") {
    CHECK_THROWS_WITH(load_fma_text("fma x\nstate q/1 initial\ntrans q(2) a@=1 -> q(1)\n"),
                      Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THROWS_AS(load_fma_text("fma x\nstate q/1\ntrans q(1) a@=2 -> q(1)\n"), DmlError);
  }
  SECTION("register duplication is rejected") {
    CHECK_THROWS_WITH(
        load_fma_text("fma x\nstate q/2 initial\ntrans q(1,2) a@=1 -> q(1,in)\n"),
        Catch::Matchers::ContainsSubstring("duplicate"));
  }
}

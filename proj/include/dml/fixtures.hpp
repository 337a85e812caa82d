#ifndef DML_FIXTURES_HPP
#define DML_FIXTURES_HPP

namespace dml::fixtures {

// Syntactic monoid of "at least three distinct data values" (language L1).
// q(d,e) is unordered; r absorbs everything except the identity.
inline constexpr const char* kL1 = R"(monoid L1
support 6
orbit o/0 identity
orbit p/1
orbit q/2
orbit r/0
norm q(d,e) = q(e,d)
prod p(d) p(d) = p(d)
prod p(d) p(e) = q(d,e)
prod p(d) q(d,e) = q(d,e)
prod p(d) q(e,d) = q(d,e)
prod p(d) q(e,f) = r()
prod q(d,e) p(d) = q(d,e)
prod q(d,e) p(e) = q(d,e)
prod q(d,e) p(f) = r()
prod q(d,e) q(d,e) = q(d,e)
prod q(d,e) q(e,d) = q(d,e)
prod q(d,e) q(d,f) = r()
prod q(d,e) q(e,f) = r()
prod q(d,e) q(f,d) = r()
prod q(d,e) q(f,e) = r()
prod q(d,e) q(f,g) = r()
prod r() p(d) = r()
prod r() q(d,e) = r()
prod r() r() = r()
prod p(d) r() = r()
prod q(d,e) r() = r()
letter a = p(d)
accept r
)";

// Syntactic monoid of "first and last data value agree" (language L2).
// A non-empty class is the pair (first, last); s(d) is the diagonal.
inline constexpr const char* kL2 = R"(monoid L2
support 6
orbit e/0 identity
orbit s/1
orbit p/2
prod s(d) s(d) = s(d)
prod s(d) s(e) = p(d,e)
prod s(d) p(d,e) = p(d,e)
prod s(d) p(e,d) = s(d)
prod s(d) p(e,f) = p(d,f)
prod p(d,e) s(d) = s(d)
prod p(d,e) s(e) = p(d,e)
prod p(d,e) s(f) = p(d,f)
prod p(d,e) p(d,e) = p(d,e)
prod p(d,e) p(e,d) = s(d)
prod p(d,e) p(d,f) = p(d,f)
prod p(d,e) p(e,f) = p(d,f)
prod p(d,e) p(f,d) = s(d)
prod p(d,e) p(f,e) = p(d,e)
prod p(d,e) p(f,g) = p(d,g)
letter a = s(d)
accept s
)";

// The x~y syntactic monoid used by the guarded-test construction: o is the
// identity, p/q carry a pending x-/y-mark value, r means the two marks
// matched, s is the null.
inline constexpr const char* kXsim = R"(monoid XSIM
support 4
orbit o/0 identity
orbit p/1
orbit q/1
orbit r/0
orbit s/0
prod p(d) p(d) = s()
prod p(d) p(e) = s()
prod q(d) q(d) = s()
prod q(d) q(e) = s()
prod p(d) q(d) = r()
prod p(d) q(e) = s()
prod q(d) p(d) = r()
prod q(d) p(e) = s()
prod r() p(d) = s()
prod r() q(d) = s()
prod r() r() = s()
prod r() s() = s()
prod p(d) r() = s()
prod q(d) r() = s()
prod p(d) s() = s()
prod q(d) s() = s()
prod s() p(d) = s()
prod s() q(d) = s()
prod s() r() = s()
prod s() s() = s()
)";

// Two-element group; the standard non-aperiodic fixture.
inline constexpr const char* kZ2 = R"(monoid Z2
support 2
orbit e/0 identity
orbit g/0
prod g() g() = e()
)";

// ---------------------------------------------------------------------------
// Formula corpus. Everything below except kDagger is rigid-guarded.

// L_{>=k}: at least k distinct data values.
inline constexpr const char* kLgeq1 = "E x. true";
inline constexpr const char* kLgeq2 = "E x. E y. rigid[succ(x,y)](x,y){x !~ y}";

// The guard of the L_{>=3} sentence: [x+1, y-1] is a maximal constant block
// whose value differs from both neighbours.
inline constexpr const char* kBlockGuard =
    "E u. E v. succ(x,u) & succ(v,y) & (u < v | u = v)"
    " & rigid[succ(x,u)](x,u){x !~ u}"
    " & rigid[succ(v,y)](v,y){v !~ y}"
    " & (A z. A z2. ((u < z | u = z) & succ(z,z2) & (z2 < v | z2 = v))"
    "    -> rigid[succ(z,z2)](z,z2){z ~ z2})";

inline constexpr const char* kLgeq3 =
    "E x. E y. rigid["
    "E u. E v. succ(x,u) & succ(v,y) & (u < v | u = v)"
    " & rigid[succ(x,u)](x,u){x !~ u}"
    " & rigid[succ(v,y)](v,y){v !~ y}"
    " & (A z. A z2. ((u < z | u = z) & succ(z,z2) & (z2 < v | z2 = v))"
    "    -> rigid[succ(z,z2)](z,z2){z ~ z2})"
    "](x,y){x !~ y}";

// First and last positions carry the same value (language L2).
inline constexpr const char* kPhiL2 = "E x. E y. rigid[first(x) & last(y)](x,y){x ~ y}";
inline constexpr const char* kFirstLastNeq = "E x. E y. rigid[first(x) & last(y)](x,y){x !~ y}";

inline constexpr const char* kConsecEq = "E x. E y. rigid[succ(x,y)](x,y){x ~ y}";
inline constexpr const char* kAllConsecNeq =
    "A x. A y. succ(x,y) -> rigid[succ(x,y)](x,y){x !~ y}";
inline constexpr const char* kAllConsecEq =
    "A x. A y. succ(x,y) -> rigid[succ(x,y)](x,y){x ~ y}";

// Exactly two guarded tests; a building block of the L_{>=3} family.
inline constexpr const char* kTwoTest =
    "(E x. E y. rigid[succ(x,y)](x,y){x ~ y}) & (E u. E v. rigid[succ(u,v)](u,v){u !~ v})";

inline constexpr const char* kFirstTagA = "E x. first(x) & a(x)";

// Even length, via the set of odd positions.
inline constexpr const char* kEvenLength =
    "E X. (A x. A y. (succ(x,y) -> ((x in X & !(y in X)) | (!(x in X) & y in X))))"
    " & (A x. (first(x) -> x in X))"
    " & (A x. (last(x) -> !(x in X)))";

// A formula with a free second-order variable.
inline constexpr const char* kMarkedA = "E x. x in Y & a(x)";

// The introduction's formula (parses, but its test is unguarded).
inline constexpr const char* kDagger = "A x. A y. (x != y -> x !~ y)";

// Two-variable guard fixtures for the rigidity corpus.
inline constexpr const char* kSuccGuard = "succ(x,y)";
inline constexpr const char* kNeqGuard = "x != y";
inline constexpr const char* kEqPosGuard = "x = y";
inline constexpr const char* kFirstLastGuard = "first(x) & last(y)";

struct NamedFormula {
  const char* name;
  const char* text;
};

// Rigid-guarded corpus for the oracle-equivalence suites; entries with
// `sentence` true have no free variables.
struct CorpusEntry {
  const char* name;
  const char* text;
  bool sentence;
};

inline constexpr CorpusEntry kRigidCorpus[] = {
    {"l_geq1", kLgeq1, true},
    {"l_geq2", kLgeq2, true},
    {"l_geq3", kLgeq3, true},
    {"phi_l2", kPhiL2, true},
    {"first_last_neq", kFirstLastNeq, true},
    {"consec_eq", kConsecEq, true},
    {"all_consec_neq", kAllConsecNeq, true},
    {"all_consec_eq", kAllConsecEq, true},
    {"two_test", kTwoTest, true},
    {"first_tag_a", kFirstTagA, true},
    {"even_length", kEvenLength, true},
    {"marked_a", kMarkedA, false},
};

inline constexpr NamedFormula kGuardCorpus[] = {
    {"succ", kSuccGuard},
    {"neq", kNeqGuard},
    {"eq_pos", kEqPosGuard},
    {"first_last", kFirstLastGuard},
    {"block", kBlockGuard},
};

}  // namespace dml::fixtures

#endif

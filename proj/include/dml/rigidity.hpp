#ifndef DML_RIGIDITY_HPP
#define DML_RIGIDITY_HPP

#include <optional>
#include <string>
#include <vector>

#include "dml/logic.hpp"
#include "dml/msoclassic.hpp"

namespace dml {

enum class RigidityStatus { Rigid, NotRigid, SemiRigid, NotSemiRigid };

struct RigidityVerdict {
  RigidityStatus status;
  // A violating word with positions (x, y, y') or (x, x', y).
  std::optional<std::pair<DataWord, std::vector<std::size_t>>> counterexample;

  bool holds() const {
    return status == RigidityStatus::Rigid || status == RigidityStatus::SemiRigid;
  }
};

struct RigidityMode {
  bool exact = true;
  std::size_t boundedLen = 5;   // bounded search: words up to this length
  DataValue boundedVals = 4;    // ... over values {1..k}
};

namespace detail {

// Searches short words for a functionality violation of phi(x, y): some x
// with two distinct y (forward) or some y with two distinct x (backward).
inline std::optional<std::pair<DataWord, std::vector<std::size_t>>> bounded_violation(
    const FormulaPtr& phi, const std::string& x, const std::string& y, bool forward,
    const std::vector<Tag>& tags, std::size_t maxLen, DataValue maxVal) {
  std::optional<std::pair<DataWord, std::vector<std::size_t>>> found;
  std::function<void(DataWord&)> rec = [&](DataWord& w) {
    if (found) return;
    std::size_t n = w.size();
    for (std::size_t a = 1; a <= n && !found; ++a) {
      std::vector<std::size_t> hits;
      for (std::size_t b = 1; b <= n; ++b) {
        Assignment asg;
        asg.fo[x] = forward ? a : b;
        asg.fo[y] = forward ? b : a;
        if (evaluate(phi, w, asg)) hits.push_back(b);
        if (hits.size() >= 2) {
          found = {w, {a, hits[0], hits[1]}};
          break;
        }
      }
    }
    if (found || n == maxLen) return;
    for (const Tag& t : tags)
      for (DataValue d = 1; d <= maxVal; ++d) {
        w.letters.push_back({d, t});
        rec(w);
        w.letters.pop_back();
      }
  };
  DataWord w;
  rec(w);
  return found;
}

// The functionality sentence: A x,y,y'. phi(x,y) & phi(x,y') -> y = y'
// (or the symmetric one when `forward` is false).
inline FormulaPtr functionality_sentence(const FormulaPtr& phi, const std::string& x,
                                         const std::string& y, bool forward) {
  const std::string& pivot = forward ? x : y;
  const std::string& moving = forward ? y : x;
  std::string moving2 = fresh_var(phi, moving + "_");
  FormulaPtr copy = substitute_fo(phi, {{moving, moving2}});
  FormulaPtr body =
      mk::implies(mk::land(phi, copy), mk::eq(moving, moving2));
  return mk::forall(pivot, mk::forall(moving, mk::forall(moving2, body)));
}

// Extracts a violating (word, positions) triple from a witness word.
inline std::pair<DataWord, std::vector<std::size_t>> violation_from_witness(
    const FormulaPtr& phi, const std::string& x, const std::string& y, bool forward,
    const DataWord& w) {
  std::size_t n = w.size();
  for (std::size_t a = 1; a <= n; ++a) {
    std::vector<std::size_t> hits;
    for (std::size_t b = 1; b <= n; ++b) {
      Assignment asg;
      asg.fo[x] = forward ? a : b;
      asg.fo[y] = forward ? b : a;
      if (evaluate(phi, w, asg)) hits.push_back(b);
      if (hits.size() >= 2) return {w, {a, hits[0], hits[1]}};
    }
  }
  throw DmlError("internal: functionality counterexample did not reproduce");
}

}  // namespace detail

// Decides (semi-)rigidity of a two-variable formula. `semiRigidOnly` checks
// only that y is functionally determined by x; full rigidity additionally
// checks the converse direction.
inline RigidityVerdict check_rigidity(const FormulaPtr& phi, const std::string& x,
                                      const std::string& y, bool semiRigidOnly,
                                      const std::vector<Tag>& tags, const RigidityMode& mode = {},
                                      const MsoLimits& limits = {}) {
  for (const std::string& v : free_fo(phi))
    if (v != x && v != y)
      throw DmlError("check_rigidity: unexpected free variable '" + v + "'");

  auto direction = [&](bool forward)
      -> std::optional<std::pair<DataWord, std::vector<std::size_t>>> {
    if (mode.exact) {
      FormulaPtr sentence = detail::functionality_sentence(phi, x, y, forward);
      SatResult sat = satisfiable(mk::lnot(sentence), tags, limits);
      if (!sat.satisfiable) return std::nullopt;
      return detail::violation_from_witness(phi, x, y, forward, *sat.witness);
    }
    return detail::bounded_violation(phi, x, y, forward, tags, mode.boundedLen, mode.boundedVals);
  };

  RigidityVerdict v;
  if (auto cex = direction(true)) {
    v.status = semiRigidOnly ? RigidityStatus::NotSemiRigid : RigidityStatus::NotRigid;
    v.counterexample = cex;
    return v;
  }
  if (semiRigidOnly) {
    v.status = RigidityStatus::SemiRigid;
    return v;
  }
  if (auto cex = direction(false)) {
    v.status = RigidityStatus::NotRigid;
    v.counterexample = cex;
    return v;
  }
  v.status = RigidityStatus::Rigid;
  return v;
}

// ---------------------------------------------------------------------------
// Grammar classification: every data test must sit inside a guard node, and
// every guard must pass the semantic rigidity test appropriate to its node,
// checked bottom-up.

enum class GrammarVerdict { RigidGuarded, SemiRigidGuarded, Neither };

struct GrammarConfig {
  std::vector<Tag> tags = {"a"};
  RigidityMode mode;  // exact by default
  MsoLimits limits;
};

inline GrammarVerdict check_grammar(const FormulaPtr& f, const GrammarConfig& cfg = {}) {
  bool semiOnly = false;
  std::function<bool(const FormulaPtr&)> walk = [&](const FormulaPtr& g) -> bool {
    if (!g) return true;
    if (!walk(g->a) || !walk(g->b)) return false;
    switch (g->kind) {
      case NodeKind::RawTest:
        return false;
      case NodeKind::RigidTest: {
        RigidityVerdict v = check_rigidity(g->a, g->v1, g->v2, false, cfg.tags, cfg.mode, cfg.limits);
        if (v.status == RigidityStatus::Rigid) return true;
        RigidityVerdict s = check_rigidity(g->a, g->v1, g->v2, true, cfg.tags, cfg.mode, cfg.limits);
        if (s.status == RigidityStatus::SemiRigid) {
          semiOnly = true;  // x ~ y with a one-direction guard is still semi-rigidly guarded
          return true;
        }
        return false;
      }
      case NodeKind::SemiRigidTest: {
        semiOnly = true;
        RigidityVerdict a = check_rigidity(g->a, g->v1, g->v2, true, cfg.tags, cfg.mode, cfg.limits);
        if (a.status != RigidityStatus::SemiRigid) return false;
        RigidityVerdict b = check_rigidity(g->b, g->v1, g->v3, true, cfg.tags, cfg.mode, cfg.limits);
        return b.status == RigidityStatus::SemiRigid;
      }
      default:
        return true;
    }
  };
  if (!walk(f)) return GrammarVerdict::Neither;
  return semiOnly ? GrammarVerdict::SemiRigidGuarded : GrammarVerdict::RigidGuarded;
}

}  // namespace dml

#endif

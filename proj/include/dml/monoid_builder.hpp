#ifndef DML_MONOID_BUILDER_HPP
#define DML_MONOID_BUILDER_HPP

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dml/morphism_types.hpp"
#include "dml/presentation.hpp"

namespace dml {

// Extracts a term-based presentation from an abstract orbit-finite data
// monoid given by element operations (the construction behind each compile
// stage and the syntactic quotient). A construction type provides:
//
//   using Elem = ...;                       // value type
//   Elem identity() const;
//   Elem multiply(const Elem&, const Elem&) const;
//   Elem rename(const Renaming&, const Elem&) const;
//   std::vector<DataValue> values(const Elem&) const;  // memory, stable order
//   std::string key(const Elem&) const;                // injective encoding
//   bool accepting(const Elem&) const;
//   std::vector<std::pair<Tag, Elem>> letter_images(DataValue d) const;
//
// Orbits are discovered by closing the letter images under products of
// minimal pairs; only reachable orbits are materialized.

struct ExtractorLimits {
  std::size_t maxOrbits = 4000;
  int maxArity = 6;
};

template <typename Con>
class PresentationExtractor {
public:
  using Elem = typename Con::Elem;

  explicit PresentationExtractor(const Con& con, ExtractorLimits limits = {})
      : con_(con), limits_(limits) {}

  struct Canon {
    std::string key;
    int arity = 0;
    Elem rep;
    std::map<DataValue, DataValue> toCanon;  // values(e) -> {1..k}
  };

  Canon canonize(const Elem& e) const {
    std::vector<DataValue> vals = con_.values(e);
    int k = static_cast<int>(vals.size());
    if (k > limits_.maxArity)
      throw DmlError("orbit arity " + std::to_string(k) + " exceeds the extractor limit");
    Canon best;
    if (k == 0) {
      best.key = con_.key(e);
      best.rep = e;
      return best;
    }
    std::vector<DataValue> target(static_cast<std::size_t>(k));
    std::iota(target.begin(), target.end(), 1);
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    bool first = true;
    do {
      std::map<DataValue, DataValue> m;
      for (std::size_t i = 0; i < vals.size(); ++i)
        m[vals[i]] = target[static_cast<std::size_t>(idx[i])];
      Elem cand = con_.rename(Renaming::extend_injection(m), e);
      std::string ck = con_.key(cand);
      if (first || ck < best.key) {
        best.key = ck;
        best.rep = cand;
        best.arity = k;
        best.toCanon = m;
        first = false;
      }
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
  }

  struct Result {
    std::shared_ptr<Presentation> presentation;
    Morphism morphism;
    std::set<std::string> accepting;
    std::map<std::string, OrbitId> orbitOfKey;

    // Maps an abstract element (already canonized by the extractor) to a
    // term of the output presentation.
  };

  Result run(const std::string& name) {
    discover();
    return emit(name);
  }

  // Expresses an arbitrary element as a term of the emitted presentation.
  Term express(const Result& res, const Elem& e) const {
    Canon c = canonize(e);
    auto it = res.orbitOfKey.find(c.key);
    if (it == res.orbitOfKey.end()) throw DmlError("element outside the extracted monoid");
    std::vector<DataValue> termValues(static_cast<std::size_t>(c.arity));
    for (auto& [v, i] : c.toCanon) termValues[i - 1] = v;
    return res.presentation->normalize(Term{it->second, termValues});
  }

private:
  struct OrbitEntry {
    std::string key;
    int arity;
    Elem rep;
  };

  void discover() {
    auto add = [&](const Elem& e) -> std::size_t {
      Canon c = canonize(e);
      auto it = keyIndex_.find(c.key);
      if (it != keyIndex_.end()) return it->second;
      if (orbits_.size() >= limits_.maxOrbits)
        throw DmlError("orbit budget exceeded while extracting a presentation");
      std::size_t id = orbits_.size();
      orbits_.push_back(OrbitEntry{c.key, c.arity, c.rep});
      keyIndex_.emplace(c.key, id);
      pending_.push_back(id);
      return id;
    };

    identityIdx_ = add(con_.identity());
    for (auto& [tag, img] : con_.letter_images(1)) {
      (void)tag;
      add(img);
    }

    std::size_t done = 0;  // pairs among the first `done` orbits are closed
    while (done < orbits_.size()) {
      std::size_t n = orbits_.size();
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          if (a >= done || b >= done) close_pair(a, b, add);
      done = n;
    }
    // One more sweep to record table entries for every pair (products were
    // already discovered, so no new orbits appear).
    table_.clear();
    for (std::size_t a = 0; a < orbits_.size(); ++a)
      for (std::size_t b = 0; b < orbits_.size(); ++b) close_pair(a, b, add);
  }

  template <typename AddFn>
  void close_pair(std::size_t a, std::size_t b, AddFn&& add) {
    // Copies: add() may grow the orbit vector and invalidate references.
    const OrbitEntry A = orbits_[a];
    const OrbitEntry B = orbits_[b];
    std::vector<DataValue> bVals = con_.values(B.rep);
    std::vector<DataValue> assignment;
    std::function<void(std::size_t, DataValue)> rec = [&](std::size_t pos, DataValue fresh) {
      if (pos == bVals.size()) {
        std::map<DataValue, DataValue> m;
        for (std::size_t i = 0; i < bVals.size(); ++i) m[bVals[i]] = assignment[i];
        Elem e2 = bVals.empty() ? B.rep : con_.rename(Renaming::extend_injection(m), B.rep);
        Elem prod = con_.multiply(A.rep, e2);
        add(prod);
        TableKey tk{a, b, assignment};
        if (!table_.count(tk)) table_.emplace(tk, prod);
        return;
      }
      for (DataValue v = 1; v <= static_cast<DataValue>(A.arity); ++v) {
        if (std::find(assignment.begin(), assignment.end(), v) != assignment.end()) continue;
        assignment.push_back(v);
        rec(pos + 1, fresh);
        assignment.pop_back();
      }
      assignment.push_back(fresh);
      rec(pos + 1, fresh + 1);
      assignment.pop_back();
    };
    rec(0, static_cast<DataValue>(A.arity) + 1);
  }

  struct TableKey {
    std::size_t a, b;
    std::vector<DataValue> assignment;
    bool operator<(const TableKey& o) const {
      if (a != o.a) return a < o.a;
      if (b != o.b) return b < o.b;
      return assignment < o.assignment;
    }
  };

  Result emit(const std::string& name) {
    Result res;
    auto P = std::make_shared<Presentation>();
    P->name = name;

    // Stable order: identity first, the rest by canonical key.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < orbits_.size(); ++i)
      if (i != identityIdx_) order.push_back(i);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return orbits_[x].key < orbits_[y].key; });
    order.insert(order.begin(), identityIdx_);

    std::vector<OrbitId> idOf(orbits_.size());
    int maxAr = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const OrbitEntry& o = orbits_[order[rank]];
      OrbitName on;
      on.name = "m" + std::to_string(rank);
      on.arity = o.arity;
      maxAr = std::max(maxAr, o.arity);
      P->orbits.push_back(on);
      idOf[order[rank]] = static_cast<OrbitId>(rank);
      res.orbitOfKey[o.key] = static_cast<OrbitId>(rank);

      OrbitSymmetry sym = OrbitSymmetry::trivial(o.arity);
      if (o.arity >= 1) {
        std::vector<int> perm(static_cast<std::size_t>(o.arity));
        std::iota(perm.begin(), perm.end(), 0);
        sym.perms.clear();
        do {
          std::map<DataValue, DataValue> m;
          for (std::size_t i = 0; i < perm.size(); ++i)
            m[static_cast<DataValue>(i + 1)] = static_cast<DataValue>(perm[i] + 1);
          Elem moved = con_.rename(Renaming::extend_injection(m), o.rep);
          if (con_.key(moved) == o.key) sym.perms.push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
      P->symmetry.push_back(sym);
      if (con_.accepting(o.rep)) res.accepting.insert(on.name);
    }
    P->identity = idOf[identityIdx_];
    P->support = static_cast<DataValue>(std::max(2, 2 * maxAr + 2));
    res.presentation = P;

    for (auto& [tk, prod] : table_) {
      Term t = express(res, prod);
      P->products.emplace(Presentation::PairKey{idOf[tk.a], idOf[tk.b], tk.assignment}, t);
    }

    Morphism h;
    h.target = P;
    for (auto& [tag, img] : con_.letter_images(1)) {
      Term t = express(res, img);
      LetterImage li;
      li.orbit = t.orbit;
      li.usesValue = !t.values.empty();
      if (t.values.size() > 1)
        throw DmlError("letter image memory exceeds the letter's own value");
      if (li.usesValue && t.values[0] != 1)
        throw DmlError("letter image does not use the input value");
      h.images[tag] = li;
    }
    res.morphism = std::move(h);
    return res;
  }

  Con con_;
  ExtractorLimits limits_;
  std::vector<OrbitEntry> orbits_;
  std::map<std::string, std::size_t> keyIndex_;
  std::deque<std::size_t> pending_;
  std::map<TableKey, Elem> table_;
  std::size_t identityIdx_ = 0;
};

}  // namespace dml

#endif

#ifndef DML_NOMINAL_HPP
#define DML_NOMINAL_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dml {

// Data values range over the naturals; 0 is never used so that value lists
// can be built up from 1 like the support sets {1..c}.
using DataValue = std::uint32_t;
using Tag = std::string;

struct DmlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite-support permutation of data values. Stored as the explicit bijection
// on its support; everything else maps to itself.
class Renaming {
public:
  Renaming() = default;

  // Pairs (from, to); must form a bijection with equal domain and range sets.
  static Renaming from_pairs(const std::vector<std::pair<DataValue, DataValue>>& pairs) {
    Renaming r;
    std::set<DataValue> dom, rng;
    for (auto [a, b] : pairs) {
      if (a == b) continue;
      if (!dom.insert(a).second) throw DmlError("renaming: duplicate domain value");
      if (!rng.insert(b).second) throw DmlError("renaming: duplicate range value");
      r.map_[a] = b;
    }
    if (dom != rng) throw DmlError("renaming: domain and range differ (not a finite permutation)");
    return r;
  }

  static Renaming identity() { return Renaming(); }

  static Renaming swap(DataValue a, DataValue b) {
    if (a == b) return Renaming();
    return from_pairs({{a, b}, {b, a}});
  }

  // Completes an injective partial map to a finite permutation. Values of
  // range\domain are sent back onto domain\range in sorted order.
  static Renaming extend_injection(const std::map<DataValue, DataValue>& inj) {
    std::set<DataValue> dom, rng;
    for (auto& [a, b] : inj) {
      if (!dom.insert(a).second) throw DmlError("extend_injection: duplicate source");
      if (!rng.insert(b).second) throw DmlError("extend_injection: not injective");
    }
    std::vector<std::pair<DataValue, DataValue>> pairs(inj.begin(), inj.end());
    std::vector<DataValue> missingSrc, missingDst;
    for (DataValue v : rng)
      if (!dom.count(v)) missingSrc.push_back(v);
    for (DataValue v : dom)
      if (!rng.count(v)) missingDst.push_back(v);
    for (std::size_t i = 0; i < missingSrc.size(); ++i) pairs.emplace_back(missingSrc[i], missingDst[i]);
    return from_pairs(pairs);
  }

  DataValue operator()(DataValue v) const {
    auto it = map_.find(v);
    return it == map_.end() ? v : it->second;
  }

  bool is_identity() const { return map_.empty(); }

  const std::map<DataValue, DataValue>& mapping() const { return map_; }

  std::set<DataValue> support() const {
    std::set<DataValue> s;
    for (auto& [a, b] : map_) s.insert(a);
    return s;
  }

  bool operator==(const Renaming& o) const { return map_ == o.map_; }

private:
  std::map<DataValue, DataValue> map_;
};

// compose(t1, t2) applies t2 first, then t1.
inline Renaming compose(const Renaming& t1, const Renaming& t2) {
  std::set<DataValue> sup;
  for (auto& [a, _] : t1.mapping()) sup.insert(a);
  for (auto& [a, _] : t2.mapping()) sup.insert(a);
  std::vector<std::pair<DataValue, DataValue>> pairs;
  for (DataValue v : sup) {
    DataValue w = t1(t2(v));
    if (w != v) pairs.emplace_back(v, w);
  }
  return Renaming::from_pairs(pairs);
}

inline Renaming invert(const Renaming& t) {
  std::vector<std::pair<DataValue, DataValue>> pairs;
  for (auto& [a, b] : t.mapping()) pairs.emplace_back(b, a);
  return Renaming::from_pairs(pairs);
}

struct Letter {
  DataValue value = 0;
  Tag tag;
  bool operator==(const Letter& o) const { return value == o.value && tag == o.tag; }
};

// A data word; positions are 1-based in all user-facing APIs.
struct DataWord {
  std::vector<Letter> letters;

  std::size_t size() const { return letters.size(); }
  bool empty() const { return letters.empty(); }
  const Letter& at(std::size_t pos1) const {  // 1-based
    if (pos1 == 0 || pos1 > letters.size()) throw DmlError("word position out of range");
    return letters[pos1 - 1];
  }
  bool operator==(const DataWord& o) const { return letters == o.letters; }
};

inline DataWord act_word(const Renaming& t, const DataWord& w) {
  DataWord r = w;
  for (auto& l : r.letters) l.value = t(l.value);
  return r;
}

// Orbit representative: values renamed to 1,2,3,... in order of first
// occurrence. Returns the canonical word and the renaming that maps w to it.
inline std::pair<DataWord, Renaming> canonical_word(const DataWord& w) {
  std::map<DataValue, DataValue> seen;
  DataWord out;
  for (const Letter& l : w.letters) {
    auto it = seen.find(l.value);
    if (it == seen.end()) it = seen.emplace(l.value, static_cast<DataValue>(seen.size() + 1)).first;
    out.letters.push_back({it->second, l.tag});
  }
  return {out, Renaming::extend_injection(seen)};
}

// Text format: whitespace-separated `tag@value` tokens; empty input is the
// empty word.
inline DataWord parse_word(const std::string& text) {
  DataWord w;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    auto at = tok.find('@');
    if (at == std::string::npos || at == 0 || at + 1 >= tok.size())
      throw DmlError("bad word token '" + tok + "' (expected tag@value)");
    Tag tag = tok.substr(0, at);
    unsigned long v = 0;
    try {
      std::size_t used = 0;
      v = std::stoul(tok.substr(at + 1), &used);
      if (used != tok.size() - at - 1) throw std::invalid_argument("");
    } catch (...) {
      throw DmlError("bad value in word token '" + tok + "'");
    }
    w.letters.push_back({static_cast<DataValue>(v), tag});
  }
  return w;
}

inline std::string format_word(const DataWord& w) {
  std::string s;
  for (const Letter& l : w.letters) {
    if (!s.empty()) s += ' ';
    s += l.tag + "@" + std::to_string(l.value);
  }
  return s;
}

}  // namespace dml

#endif

#ifndef DML_MORPHISM_TYPES_HPP
#define DML_MORPHISM_TYPES_HPP

#include <map>
#include <memory>
#include <set>

#include "dml/presentation.hpp"

namespace dml {

// Image of a letter (d, a): a term over values {d}. Equivariance of the
// morphism forces arity <= 1 with the single value being d itself.
struct LetterImage {
  OrbitId orbit = -1;
  bool usesValue = false;
};

struct Morphism {
  std::shared_ptr<const Presentation> target;
  std::map<Tag, LetterImage> images;

  Term image(DataValue d, const Tag& tag) const {
    auto it = images.find(tag);
    if (it == images.end()) throw DmlError("morphism has no image for tag '" + tag + "'");
    Term t{it->second.orbit, {}};
    if (it->second.usesValue) t.values.push_back(d);
    return t;
  }

  std::vector<Tag> tags() const {
    std::vector<Tag> out;
    for (auto& [t, _] : images) out.push_back(t);
    return out;
  }
};

struct Recognizer {
  Morphism morphism;
  std::set<std::string> accepting;  // orbit names of the target

  bool accepts_orbit(OrbitId o) const {
    return accepting.count(morphism.target->orbit(o).name) > 0;
  }
};

}  // namespace dml

#endif

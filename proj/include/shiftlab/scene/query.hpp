#pragma once

#include <vector>

#include "shiftlab/scene/scene.hpp"

namespace shiftlab::scene {

inline constexpr int kMasked = -1;

// <subject, predicate, object> over category ids; kMasked hides a slot.
struct Query {
  int subject = 0;
  int predicate = 0;
  int object = 0;
  bool operator==(const Query&) const = default;
};

// A category-level query and its targets. The subject mask is the union over
// every entity taking the subject role in a matching relationship; the object
// mask likewise.
struct GroundedQuery {
  Query query;
  std::size_t scene = 0;
  GroundMask subject, object;
  // The queried category occurs at least twice in the scene.
  bool subject_ambiguous = false;
  bool object_ambiguous = false;
};

// One query per distinct (subject category, predicate, object category),
// sorted by that triple.
std::vector<GroundedQuery> build_queries(const Scene& scene, std::size_t scene_index,
                                         const GridGeometry& geometry);
std::vector<GroundedQuery> build_queries(const std::vector<Scene>& scenes,
                                         const GridGeometry& geometry);

}  // namespace shiftlab::scene

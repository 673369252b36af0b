#include "shiftlab/scene/query.hpp"

#include <map>
#include <set>
#include <tuple>

#include "shiftlab/scene/generate.hpp"

namespace shiftlab::scene {

std::vector<GroundedQuery> build_queries(const Scene& scene, std::size_t scene_index,
                                         const GridGeometry& geometry) {
  using Key = std::tuple<int, int, int>;
  std::map<Key, std::pair<std::set<std::size_t>, std::set<std::size_t>>> groups;
  for (const auto& r : scene.relationships) {
    if (r.subject >= scene.entities.size() || r.object >= scene.entities.size()) {
      throw ValidationError("scene " + scene.id + ": relationship index out of range");
    }
    auto& g = groups[{scene.entities[r.subject].category, r.predicate,
                      scene.entities[r.object].category}];
    g.first.insert(r.subject);
    g.second.insert(r.object);
  }
  std::vector<GroundedQuery> out;
  out.reserve(groups.size());
  for (const auto& [key, members] : groups) {
    GroundedQuery q;
    q.query = {std::get<0>(key), std::get<1>(key), std::get<2>(key)};
    q.scene = scene_index;
    q.subject = union_mask(scene, {members.first.begin(), members.first.end()}, geometry);
    q.object = union_mask(scene, {members.second.begin(), members.second.end()}, geometry);
    q.subject_ambiguous = scene.count(q.query.subject) >= 2;
    q.object_ambiguous = scene.count(q.query.object) >= 2;
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<GroundedQuery> build_queries(const std::vector<Scene>& scenes,
                                         const GridGeometry& geometry) {
  std::vector<GroundedQuery> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    auto qs = build_queries(scenes[i], i, geometry);
    for (auto& q : qs) out.push_back(std::move(q));
  }
  return out;
}

}  // namespace shiftlab::scene

#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "shiftlab/model/ssas.hpp"
#include "shiftlab/scene/scene.hpp"

namespace shiftlab::saccade {

// A walk over category nodes. A forward edge treats src as the subject of
// <src, predicate, dst>; an inverse edge treats src as the object.
struct Edge {
  std::size_t src = 0;
  int predicate = 0;
  std::size_t dst = 0;
  model::Direction direction = model::Direction::kForward;
};

struct SceneGraph {
  std::vector<int> nodes;  // category ids
  std::vector<Edge> path;
  std::size_t start = 0;

  // ValidationError on bad ids or when the path is not a walk from start.
  void validate(const scene::Vocabulary& vocab) const;
};

// {"nodes":["red circle",...],"path":[{"src":0,"p":"left","dst":1,"dir":"fwd"}],"start":0}
SceneGraph graph_from_json(const nlohmann::json& j, const scene::Vocabulary& vocab);
nlohmann::json graph_to_json(const SceneGraph& g, const scene::Vocabulary& vocab);
SceneGraph load_graph(const std::filesystem::path& path, const scene::Vocabulary& vocab);

template <typename T>
struct NodeMap {
  std::size_t node = 0;
  model::AttentionMap<T> map;
};

template <typename T>
struct Traversal {
  std::vector<NodeMap<T>> visits;  // one entry per step, start first
  std::vector<NodeMap<T>> nodes;   // distinct nodes in first-visit order, latest estimate
};

// Attend on the start node, then for each edge shift the current map (Sh for
// forward, Sh^-1 for inverse), modulate mu and attend with the next node.
// The graph is validated before any compute.
template <typename T>
Traversal<T> traverse(const model::SsasModel<T>& m, const BasicTensor<T>& mu, const SceneGraph& graph,
                      const scene::Vocabulary& vocab);

// Row-major argmax of an L x L map (first maximum wins).
template <typename T>
std::pair<int, int> argmax_cell(const BasicTensor<T>& map);

}  // namespace shiftlab::saccade

#include "shiftlab/saccade/saccade.hpp"

#include "shiftlab/core/error.hpp"
#include "shiftlab/core/ops.hpp"
#include "shiftlab/scene/io.hpp"

namespace shiftlab::saccade {

void SceneGraph::validate(const scene::Vocabulary& vocab) const {
  if (nodes.empty()) throw ValidationError("scene graph has no nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 0 || nodes[i] >= static_cast<int>(vocab.categories.size())) {
      throw ValidationError("scene graph node " + std::to_string(i) + " has invalid category id " +
                            std::to_string(nodes[i]));
    }
  }
  if (start >= nodes.size()) throw ValidationError("scene graph start node out of range");
  std::size_t at = start;
  for (std::size_t e = 0; e < path.size(); ++e) {
    const Edge& edge = path[e];
    if (edge.src >= nodes.size() || edge.dst >= nodes.size()) {
      throw ValidationError("scene graph edge " + std::to_string(e) + " references a missing node");
    }
    if (edge.predicate < 0 || edge.predicate >= static_cast<int>(vocab.predicates.size())) {
      throw ValidationError("scene graph edge " + std::to_string(e) + " has invalid predicate id");
    }
    if (edge.src != at) {
      throw ValidationError("scene graph path is discontinuous at edge " + std::to_string(e) + ": starts at node " +
                            std::to_string(edge.src) + " but the walk is at node " + std::to_string(at));
    }
    at = edge.dst;
  }
}

SceneGraph graph_from_json(const nlohmann::json& j, const scene::Vocabulary& vocab) {
  SceneGraph g;
  try {
    for (const auto& n : j.at("nodes")) g.nodes.push_back(vocab.category(n.get<std::string>()));
    if (j.contains("path")) {
      for (const auto& e : j.at("path")) {
        Edge edge;
        edge.src = e.at("src").get<std::size_t>();
        edge.dst = e.at("dst").get<std::size_t>();
        edge.predicate = vocab.predicate(e.at("p").get<std::string>());
        const std::string dir = e.value("dir", std::string("fwd"));
        if (dir == "fwd") {
          edge.direction = model::Direction::kForward;
        } else if (dir == "inv") {
          edge.direction = model::Direction::kInverse;
        } else {
          throw ValidationError("scene graph edge direction must be \"fwd\" or \"inv\", got \"" + dir + "\"");
        }
        g.path.push_back(edge);
      }
    }
    g.start = j.value("start", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scene graph: ") + e.what());
  }
  g.validate(vocab);
  return g;
}

nlohmann::json graph_to_json(const SceneGraph& g, const scene::Vocabulary& vocab) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (int n : g.nodes) j["nodes"].push_back(vocab.categories.at(static_cast<std::size_t>(n)));
  j["path"] = nlohmann::json::array();
  for (const Edge& e : g.path) {
    j["path"].push_back({{"src", e.src},
                         {"p", vocab.predicates.at(static_cast<std::size_t>(e.predicate))},
                         {"dst", e.dst},
                         {"dir", e.direction == model::Direction::kForward ? "fwd" : "inv"}});
  }
  j["start"] = g.start;
  return j;
}

SceneGraph load_graph(const std::filesystem::path& path, const scene::Vocabulary& vocab) {
  return graph_from_json(scene::read_json_file(path), vocab);
}

template <typename T>
Traversal<T> traverse(const model::SsasModel<T>& m, const BasicTensor<T>& mu, const SceneGraph& graph,
                      const scene::Vocabulary& vocab) {
  graph.validate(vocab);
  require_shape(mu.shape(), {m.config().grid(), m.config().grid(), m.config().channels()}, "feature map");
  Traversal<T> out;
  std::vector<std::size_t> slot(graph.nodes.size(), graph.nodes.size());
  auto record = [&](std::size_t node, model::AttentionMap<T> map) {
    if (slot[node] == graph.nodes.size()) {
      slot[node] = out.nodes.size();
      out.nodes.push_back({node, map});
    } else {
      out.nodes[slot[node]].map = map;
    }
    out.visits.push_back({node, std::move(map)});
  };

  record(graph.start, model::attend(mu, m.embedding_vector(graph.nodes[graph.start])));
  for (const Edge& e : graph.path) {
    const model::AttentionMap<T>& cur = out.visits.back().map;
    const model::AttentionMap<T> shifted = model::shift(cur.activated, m.stack(e.predicate, e.direction));
    const BasicTensor<T> modulated = ops::broadcast_mul(shifted.activated, mu);
    record(e.dst, model::attend(modulated, m.embedding_vector(graph.nodes[e.dst])));
  }
  return out;
}

template <typename T>
std::pair<int, int> argmax_cell(const BasicTensor<T>& map) {
  require_rank(map.shape(), 2, "argmax_cell");
  std::size_t best = 0;
  for (std::size_t i = 1; i < map.size(); ++i) {
    if (map[i] > map[best]) best = i;
  }
  const int w = static_cast<int>(map.shape()[1]);
  return {static_cast<int>(best) / w, static_cast<int>(best) % w};
}

template Traversal<float> traverse<float>(const model::SsasModel<float>&, const Tensor&, const SceneGraph&,
                                          const scene::Vocabulary&);
template Traversal<double> traverse<double>(const model::SsasModel<double>&, const BasicTensor<double>&,
                                            const SceneGraph&, const scene::Vocabulary&);
template std::pair<int, int> argmax_cell<float>(const Tensor&);
template std::pair<int, int> argmax_cell<double>(const BasicTensor<double>&);

}  // namespace shiftlab::saccade

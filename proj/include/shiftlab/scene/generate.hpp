#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/scene/scene.hpp"

namespace shiftlab::scene {

// Deterministic in (config, seed). Throws GenerationError when an entity
// cannot be placed within config.max_attempts draws.
Scene generate_scene(const GenConfig& config, std::uint64_t seed, const std::string& id = "");

// Scene i uses seed mix_seed(master_seed, i); on GenerationError it moves to
// the next stream mix_seed(master_seed, i + k * count). Ids are prefix_000000.
std::vector<Scene> generate_split(const GenConfig& config, std::uint64_t master_seed,
                                  std::size_t count, const std::string& prefix);

// Every ordered pair (a, b), a != b: <a, left, b> iff cx(a) + margin < cx(b),
// <a, right, b> iff cx(a) > cx(b) + margin, above/below likewise on y with y
// pointing down.
std::vector<Relationship> derive_relationships(const std::vector<Entity>& entities, int margin);

// Opaque shapes in category color over mid-gray; W x W x 3 in [0, 1].
Tensor rasterize(const Scene& scene, const Vocabulary& vocab);

// A cell is set iff at least half of its pixels lie inside the box; an empty
// result falls back to the cell holding the box center.
GroundMask box_to_mask(const Box& box, const GridGeometry& geometry);
GroundMask union_mask(const Scene& scene, const std::vector<std::size_t>& entities,
                      const GridGeometry& geometry);

struct Census {
  std::size_t scenes = 0;
  std::size_t ambiguous_scenes = 0;
  std::vector<std::size_t> per_predicate;
  double ambiguous_fraction() const {
    return scenes ? static_cast<double>(ambiguous_scenes) / static_cast<double>(scenes) : 0.0;
  }
};

bool is_ambiguous(const Scene& scene);
Census census(const std::vector<Scene>& scenes, std::size_t predicate_count);

}  // namespace shiftlab::scene

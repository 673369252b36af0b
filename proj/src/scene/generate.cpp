#include "shiftlab/scene/generate.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "shiftlab/core/random.hpp"

namespace shiftlab::scene {

namespace {

std::string scene_id(const std::string& prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return prefix.empty() ? std::string(buf) : prefix + "_" + buf;
}

bool place(const GenConfig& config, const GridGeometry& g, const std::vector<Entity>& placed,
           Rng& rng, Box& out) {
  const int lo = g.offset, hi = g.offset + g.cell * g.grid;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    const int side = static_cast<int>(rng.range(config.min_box, config.max_box));
    const int x0 = static_cast<int>(rng.range(lo, hi - side));
    const int y0 = static_cast<int>(rng.range(lo, hi - side));
    const Box b{x0, y0, x0 + side, y0 + side};
    bool ok = true;
    for (const auto& e : placed) {
      const double limit = config.max_overlap * std::min(b.area(), e.bbox.area());
      if (intersection_area(b, e.bbox) > limit) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out = b;
      return true;
    }
  }
  return false;
}

}  // namespace

Scene generate_scene(const GenConfig& config, std::uint64_t seed, const std::string& id) {
  config.validate();
  const GridGeometry g = config.geometry();
  Rng rng(seed);
  int n = static_cast<int>(rng.range(config.min_entities, config.max_entities));
  const bool ambiguous = config.ambiguous_fraction > 0.0 && rng.bernoulli(config.ambiguous_fraction);
  if (ambiguous) n = std::max(n, 2);
  const int distinct = ambiguous ? n - 1 : n;

  std::vector<int> pool(config.vocab.categories.size());
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(pool);
  std::vector<int> cats(pool.begin(), pool.begin() + distinct);
  if (ambiguous) {
    cats.push_back(cats.front());
    rng.shuffle(cats);
  }

  Scene s;
  s.id = id;
  s.width = s.height = config.image_size;
  s.seed = seed;
  for (int c : cats) {
    Box b;
    if (!place(config, g, s.entities, rng, b)) {
      throw GenerationError("could not place entity " + std::to_string(s.entities.size()) +
                            " within " + std::to_string(config.max_attempts) + " attempts");
    }
    s.entities.push_back({c, b});
  }
  s.relationships = derive_relationships(s.entities, config.margin);
  return s;
}

std::vector<Scene> generate_split(const GenConfig& config, std::uint64_t master_seed,
                                  std::size_t count, const std::string& prefix) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0;; ++k) {
      try {
        out.push_back(generate_scene(config, mix_seed(master_seed, i + k * count), scene_id(prefix, i)));
        break;
      } catch (const GenerationError&) {
        if (k >= 100) throw;
      }
    }
  }
  return out;
}

std::vector<Relationship> derive_relationships(const std::vector<Entity>& entities, int margin) {
  std::vector<Relationship> out;
  for (std::size_t a = 0; a < entities.size(); ++a) {
    for (std::size_t b = 0; b < entities.size(); ++b) {
      if (a == b) continue;
      const double ax = entities[a].bbox.center_x(), ay = entities[a].bbox.center_y();
      const double bx = entities[b].bbox.center_x(), by = entities[b].bbox.center_y();
      if (ax + margin < bx) out.push_back({a, kLeft, b});
      if (ax > bx + margin) out.push_back({a, kRight, b});
      if (ay + margin < by) out.push_back({a, kAbove, b});
      if (ay > by + margin) out.push_back({a, kBelow, b});
    }
  }
  return out;
}

namespace {

struct Look {
  std::array<float, 3> rgb{0.5f, 0.5f, 0.5f};
  int shape = 1;  // 0 circle, 1 square, 2 triangle
};

Look look_of(const std::string& name) {
  Look l;
  std::istringstream words(name);
  std::string color, shape;
  words >> color >> shape;
  if (color == "red") l.rgb = {0.85f, 0.2f, 0.2f};
  else if (color == "green") l.rgb = {0.2f, 0.7f, 0.3f};
  else if (color == "blue") l.rgb = {0.2f, 0.35f, 0.85f};
  else if (color == "yellow") l.rgb = {0.9f, 0.8f, 0.2f};
  else {
    const std::size_t h = std::hash<std::string>{}(color);
    l.rgb = {static_cast<float>(h % 7) / 7.0f, static_cast<float>((h / 7) % 7) / 7.0f,
             static_cast<float>((h / 49) % 7) / 7.0f};
  }
  if (shape == "circle") l.shape = 0;
  else if (shape == "triangle") l.shape = 2;
  return l;
}

bool inside_shape(const Box& b, int shape, int x, int y) {
  const double px = x + 0.5, py = y + 0.5;
  if (shape == 0) {
    const double r = 0.5 * std::min(b.width(), b.height());
    const double dx = px - b.center_x(), dy = py - b.center_y();
    return dx * dx + dy * dy <= r * r;
  }
  if (shape == 2) {
    const double t = (py - b.y0) / b.height();
    return std::abs(px - b.center_x()) <= t * 0.5 * b.width();
  }
  return true;
}

}  // namespace

Tensor rasterize(const Scene& scene, const Vocabulary& vocab) {
  const std::size_t w = static_cast<std::size_t>(scene.width), h = static_cast<std::size_t>(scene.height);
  Tensor img({h, w, 3}, 0.5f);
  for (const auto& e : scene.entities) {
    if (e.category < 0 || static_cast<std::size_t>(e.category) >= vocab.categories.size()) {
      throw ValidationError("entity category out of vocabulary range");
    }
    const Look l = look_of(vocab.categories[static_cast<std::size_t>(e.category)]);
    for (int y = std::max(0, e.bbox.y0); y < std::min(scene.height, e.bbox.y1); ++y) {
      for (int x = std::max(0, e.bbox.x0); x < std::min(scene.width, e.bbox.x1); ++x) {
        if (!inside_shape(e.bbox, l.shape, x, y)) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = l.rgb[c];
        }
      }
    }
  }
  return img;
}

GroundMask box_to_mask(const Box& box, const GridGeometry& g) {
  const std::size_t L = static_cast<std::size_t>(g.grid);
  GroundMask m{Tensor({L, L}), {}};
  const int need = g.cell * g.cell;
  bool any = false;
  for (int r = 0; r < g.grid; ++r) {
    for (int c = 0; c < g.grid; ++c) {
      const Box cell{g.offset + c * g.cell, g.offset + r * g.cell, g.offset + (c + 1) * g.cell,
                     g.offset + (r + 1) * g.cell};
      if (2 * intersection_area(box, cell) >= need) {
        m.grid.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1.0f;
        any = true;
      }
    }
  }
  if (!any) {
    m.grid.at(static_cast<std::size_t>(g.row_of(box.center_y())),
              static_cast<std::size_t>(g.col_of(box.center_x()))) = 1.0f;
  }
  return m;
}

GroundMask union_mask(const Scene& scene, const std::vector<std::size_t>& entities,
                      const GridGeometry& g) {
  const std::size_t L = static_cast<std::size_t>(g.grid);
  GroundMask m{Tensor({L, L}), entities};
  for (std::size_t idx : entities) {
    if (idx >= scene.entities.size()) throw ValidationError("entity index out of range");
    const GroundMask one = box_to_mask(scene.entities[idx].bbox, g);
    for (std::size_t i = 0; i < m.grid.size(); ++i) m.grid[i] = std::max(m.grid[i], one.grid[i]);
  }
  return m;
}

bool is_ambiguous(const Scene& scene) {
  for (const auto& e : scene.entities) {
    if (scene.count(e.category) >= 2) return true;
  }
  return false;
}

Census census(const std::vector<Scene>& scenes, std::size_t predicate_count) {
  Census c;
  c.per_predicate.assign(predicate_count, 0);
  for (const auto& s : scenes) {
    ++c.scenes;
    c.ambiguous_scenes += is_ambiguous(s);
    for (const auto& r : s.relationships) {
      if (r.predicate >= 0 && static_cast<std::size_t>(r.predicate) < predicate_count) {
        ++c.per_predicate[static_cast<std::size_t>(r.predicate)];
      }
    }
  }
  return c;
}

}  // namespace shiftlab::scene

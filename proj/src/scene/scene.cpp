#include "shiftlab/scene/scene.hpp"

#include <algorithm>
#include <cmath>

namespace shiftlab::scene {

int intersection_area(const Box& a, const Box& b) {
  const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0 && h > 0) ? w * h : 0;
}

int Scene::count(int category) const {
  int n = 0;
  for (const auto& e : entities) n += e.category == category;
  return n;
}

Vocabulary Vocabulary::standard() {
  Vocabulary v;
  for (const char* color : {"red", "green", "blue", "yellow"}) {
    for (const char* shape : {"circle", "square", "triangle"}) {
      v.categories.push_back(std::string(color) + " " + shape);
    }
  }
  v.predicates = {"left", "right", "above", "below"};
  return v;
}

namespace {
int lookup(const std::vector<std::string>& names, const std::string& name, const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError(std::string("unknown ") + what + " '" + name + "'");
  return static_cast<int>(it - names.begin());
}
}  // namespace

int Vocabulary::category(const std::string& name) const {
  return lookup(categories, name, "category");
}

int Vocabulary::predicate(const std::string& name) const {
  return lookup(predicates, name, "predicate");
}

GridGeometry GridGeometry::make(int image_size, int grid) {
  if (grid <= 0 || image_size < grid) {
    throw ConfigError("grid " + std::to_string(grid) + " does not fit image size " +
                      std::to_string(image_size));
  }
  GridGeometry g;
  g.image_size = image_size;
  g.grid = grid;
  g.cell = image_size / grid;
  g.offset = (image_size - g.cell * grid) / 2;
  return g;
}

int GridGeometry::row_of(double y) const {
  const int r = static_cast<int>(std::floor((y - offset) / cell));
  return std::clamp(r, 0, grid - 1);
}

int GridGeometry::col_of(double x) const { return row_of(x); }

void GenConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("generator config: " + m); };
  const GridGeometry g = GridGeometry::make(image_size, grid);
  if (min_entities < 1 || max_entities < min_entities) fail("entity count range is empty");
  if (static_cast<std::size_t>(max_entities) > vocab.categories.size()) {
    fail("max_entities exceeds the category vocabulary");
  }
  if (!(ambiguous_fraction >= 0.0 && ambiguous_fraction <= 1.0)) {
    fail("ambiguous_fraction must lie in [0, 1]");
  }
  if (ambiguous_fraction > 0.0 && max_entities < 2) fail("ambiguous scenes need max_entities >= 2");
  if (min_box < 3 || max_box < min_box) fail("box side range must satisfy 3 <= min <= max");
  if (max_box > g.cell * g.grid) fail("max_box exceeds the gridded region");
  if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) fail("max_overlap must lie in [0, 1]");
  if (margin < 0) fail("margin must be non-negative");
  if (max_attempts <= 0) fail("max_attempts must be positive");
  if (vocab.predicates != Vocabulary::standard().predicates) {
    fail("predicates must be left, right, above, below");
  }
}

std::size_t GroundMask::count() const {
  std::size_t n = 0;
  for (float v : grid.values()) n += v > 0.5f;
  return n;
}

}  // namespace shiftlab::scene

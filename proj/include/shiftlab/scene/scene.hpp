#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/core/error.hpp"
#include "shiftlab/core/tensor.hpp"

namespace shiftlab::scene {

// Pixel box, half-open: covers x in [x0, x1), y in [y0, y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  int area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool operator==(const Box&) const = default;
};

int intersection_area(const Box& a, const Box& b);

struct Entity {
  int category = 0;
  Box bbox;
  bool operator==(const Entity&) const = default;
};

enum Predicate : int { kLeft = 0, kRight = 1, kAbove = 2, kBelow = 3 };

struct Relationship {
  std::size_t subject = 0;
  int predicate = 0;
  std::size_t object = 0;
  bool operator==(const Relationship&) const = default;
};

struct Scene {
  std::string id;
  int width = 0, height = 0;
  std::uint64_t seed = 0;
  std::vector<Entity> entities;
  std::vector<Relationship> relationships;

  bool operator==(const Scene&) const = default;
  int count(int category) const;
};

struct Vocabulary {
  std::vector<std::string> categories;
  std::vector<std::string> predicates;

  // 3 shapes x 4 colors, "red circle" ... "yellow triangle"; left/right/above/below.
  static Vocabulary standard();
  int category(const std::string& name) const;
  int predicate(const std::string& name) const;
  bool operator==(const Vocabulary&) const = default;
};

// Maps the integer pixel grid onto the L x L analysis grid. Cells are
// cell x cell pixels; the grid is centered so the border of `offset` pixels
// on each side lies outside every cell.
struct GridGeometry {
  int image_size = 64;
  int grid = 14;
  int cell = 4;
  int offset = 4;

  static GridGeometry make(int image_size, int grid);
  // Cell (row, col) holding pixel coordinate (x, y), clamped into the grid.
  int row_of(double y) const;
  int col_of(double x) const;
};

struct GenConfig {
  int image_size = 64;
  int grid = 14;
  int min_entities = 2, max_entities = 6;
  int min_box = 8, max_box = 16;
  double ambiguous_fraction = 0.6;
  double max_overlap = 0.3;
  int margin = 4;
  int max_attempts = 1000;
  std::size_t train = 2000, val = 300, test = 500;
  Vocabulary vocab = Vocabulary::standard();

  void validate() const;  // throws ConfigError
  GridGeometry geometry() const { return GridGeometry::make(image_size, grid); }
};

// Binary L x L grid with the entities it was built from.
struct GroundMask {
  Tensor grid;
  std::vector<std::size_t> entities;

  std::size_t count() const;
};

}  // namespace shiftlab::scene

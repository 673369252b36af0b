#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "shiftlab/core/random.hpp"
#include "shiftlab/scene/generate.hpp"
#include "shiftlab/scene/io.hpp"
#include "shiftlab/scene/query.hpp"
#include "shiftlab/scene/stat_kernels.hpp"

namespace shiftlab::scene {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shiftlab_scene_" + name);
  fs::remove_all(p);
  return p;
}

Entity at_center(int cat, int cx, int cy, int half = 4) {
  return {cat, {cx - half, cy - half, cx + half, cy + half}};
}

TEST(Geometry, CenteredGrid) {
  const auto g = GridGeometry::make(64, 14);
  EXPECT_EQ(g.cell, 4);
  EXPECT_EQ(g.offset, 4);
  EXPECT_EQ(g.row_of(4.0), 0);
  EXPECT_EQ(g.row_of(59.9), 13);
  EXPECT_EQ(g.col_of(0.0), 0);
  EXPECT_THROW(GridGeometry::make(10, 14), ConfigError);
}

TEST(GenConfig, RejectsInvalidValues) {
  GenConfig c;
  EXPECT_NO_THROW(c.validate());
  c.ambiguous_fraction = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GenConfig{};
  c.max_entities = 13;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GenConfig{};
  c.min_box = 2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generate, ForcedAmbiguityWithTwoEntities) {
  GenConfig c;
  c.min_entities = c.max_entities = 2;
  c.ambiguous_fraction = 1.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = generate_scene(c, seed);
    ASSERT_EQ(s.entities.size(), 2u);
    EXPECT_EQ(s.entities[0].category, s.entities[1].category);
  }
}

TEST(Generate, DeterministicInSeed) {
  const GenConfig c;
  const Vocabulary v = Vocabulary::standard();
  for (std::uint64_t seed : {1ull, 99ull, 123456789ull}) {
    const Scene a = generate_scene(c, seed, "x"), b = generate_scene(c, seed, "x");
    EXPECT_EQ(a, b);
    EXPECT_EQ(scene_to_json(a, v).dump(), scene_to_json(b, v).dump());
  }
  EXPECT_NE(generate_scene(c, 1), generate_scene(c, 2));
}

TEST(Generate, EntityInvariants) {
  const GenConfig c;
  const auto g = c.geometry();
  const auto scenes = generate_split(c, 5, 300, "t");
  for (const auto& s : scenes) {
    ASSERT_GE(s.entities.size(), 2u);
    ASSERT_LE(s.entities.size(), 6u);
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
      const Box& b = s.entities[i].bbox;
      EXPECT_TRUE(0 <= b.x0 && b.x0 < b.x1 && b.x1 <= s.width);
      EXPECT_TRUE(0 <= b.y0 && b.y0 < b.y1 && b.y1 <= s.height);
      EXPECT_GE(b.area(), 9);
      // entities keep clear of the border outside the grid
      EXPECT_GE(b.x0, g.offset);
      EXPECT_LE(b.x1, g.offset + g.cell * g.grid);
      for (std::size_t j = 0; j < i; ++j) {
        const Box& o = s.entities[j].bbox;
        EXPECT_LE(intersection_area(b, o), 0.3 * std::min(b.area(), o.area()));
      }
    }
    // non-ambiguous scenes have no repeated category; ambiguous ones exactly one pair
    std::vector<int> counts(12, 0);
    for (const auto& e : s.entities) ++counts[static_cast<std::size_t>(e.category)];
    int pairs = 0;
    for (int n : counts) {
      EXPECT_LE(n, 2);
      pairs += n == 2;
    }
    EXPECT_EQ(pairs, is_ambiguous(s) ? 1 : 0);
  }
}

TEST(Generate, AmbiguousFractionCensus) {
  GenConfig c;
  const auto scenes = generate_split(c, 2024, 10000, "c");
  const Census cs = census(scenes, 4);
  EXPECT_NEAR(cs.ambiguous_fraction(), 0.6, 0.03);
  for (auto n : cs.per_predicate) EXPECT_GT(n, 0u);
}

TEST(Generate, PlacementFailureRaises) {
  GenConfig c;
  c.min_entities = c.max_entities = 6;
  c.min_box = c.max_box = 56;
  c.max_overlap = 0.0;
  c.max_attempts = 5;
  c.ambiguous_fraction = 0.0;
  EXPECT_THROW(generate_scene(c, 3), GenerationError);
}

TEST(Relationships, HorizontalPair) {
  const auto rels = derive_relationships({at_center(0, 10, 32), at_center(1, 50, 32)}, 4);
  ASSERT_EQ(rels.size(), 2u);
  EXPECT_EQ(rels[0], (Relationship{0, kLeft, 1}));
  EXPECT_EQ(rels[1], (Relationship{1, kRight, 0}));
}

TEST(Relationships, EqualCentersGiveNothing) {
  EXPECT_TRUE(derive_relationships({at_center(0, 30, 30), at_center(1, 30, 30, 6)}, 4).empty());
  // inside the margin on both axes
  EXPECT_TRUE(derive_relationships({at_center(0, 30, 30), at_center(1, 34, 26)}, 4).empty());
}

TEST(Relationships, BruteForceRecheck) {
  const auto scenes = generate_split(GenConfig{}, 77, 100, "r");
  for (const auto& s : scenes) {
    std::size_t expected = 0;
    for (std::size_t a = 0; a < s.entities.size(); ++a) {
      for (std::size_t b = 0; b < s.entities.size(); ++b) {
        if (a == b) continue;
        const double ax = (s.entities[a].bbox.x0 + s.entities[a].bbox.x1) / 2.0;
        const double bx = (s.entities[b].bbox.x0 + s.entities[b].bbox.x1) / 2.0;
        const double ay = (s.entities[a].bbox.y0 + s.entities[a].bbox.y1) / 2.0;
        const double by = (s.entities[b].bbox.y0 + s.entities[b].bbox.y1) / 2.0;
        expected += (bx - ax > 4) + (ax - bx > 4) + (by - ay > 4) + (ay - by > 4);
      }
    }
    EXPECT_EQ(s.relationships.size(), expected);
    for (const auto& r : s.relationships) {
      ASSERT_NE(r.subject, r.object);
      const Box& a = s.entities[r.subject].bbox;
      const Box& b = s.entities[r.object].bbox;
      const double dx = b.center_x() - a.center_x(), dy = b.center_y() - a.center_y();
      switch (r.predicate) {
        case kLeft: EXPECT_GT(dx, 4); break;
        case kRight: EXPECT_LT(dx, -4); break;
        case kAbove: EXPECT_GT(dy, 4); break;
        case kBelow: EXPECT_LT(dy, -4); break;
        default: FAIL();
      }
    }
  }
}

TEST(BoxToMask, WholeImageAndSingleCell) {
  const auto g = GridGeometry::make(64, 14);
  const GroundMask all = box_to_mask({0, 0, 64, 64}, g);
  EXPECT_EQ(all.count(), 196u);
  const GroundMask one = box_to_mask({4 + 3 * 4, 4 + 5 * 4, 4 + 4 * 4, 4 + 6 * 4}, g);
  EXPECT_EQ(one.count(), 1u);
  EXPECT_EQ(one.grid.at(5, 3), 1.0f);
}

TEST(BoxToMask, MatchesPixelCountOracle) {
  const auto g = GridGeometry::make(64, 14);
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int x0 = static_cast<int>(rng.range(0, 62)), y0 = static_cast<int>(rng.range(0, 62));
    const int x1 = static_cast<int>(rng.range(x0 + 1, 64)), y1 = static_cast<int>(rng.range(y0 + 1, 64));
    const Box b{x0, y0, x1, y1};
    const GroundMask m = box_to_mask(b, g);
    Tensor oracle({14, 14});
    bool any = false;
    for (int r = 0; r < 14; ++r) {
      for (int c = 0; c < 14; ++c) {
        int covered = 0;
        for (int y = 4 + 4 * r; y < 8 + 4 * r; ++y)
          for (int x = 4 + 4 * c; x < 8 + 4 * c; ++x) covered += x >= x0 && x < x1 && y >= y0 && y < y1;
        if (covered * 2 >= 16) {
          oracle.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
          any = true;
        }
      }
    }
    if (!any) {
      const int r = std::clamp(static_cast<int>(std::floor(((y0 + y1) / 2.0 - 4) / 4)), 0, 13);
      const int c = std::clamp(static_cast<int>(std::floor(((x0 + x1) / 2.0 - 4) / 4)), 0, 13);
      oracle.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
    }
    ASSERT_EQ(m.grid, oracle) << x0 << "," << y0 << "," << x1 << "," << y1;
    EXPECT_GE(m.count(), 1u);
  }
}

TEST(Queries, UnionMasksAndAmbiguityFlags) {
  Scene s;
  s.width = s.height = 64;
  s.entities = {at_center(0, 12, 32), at_center(1, 40, 32), at_center(1, 56, 32)};
  s.relationships = derive_relationships(s.entities, 4);
  const auto g = GridGeometry::make(64, 14);
  const auto qs = build_queries(s, 7, g);
  // <0,left,1> merges two relationships; <1,left,1>, <1,right,0>, <1,right,1>.
  ASSERT_EQ(qs.size(), 4u);
  EXPECT_EQ(qs[0].query, (Query{0, kLeft, 1}));
  EXPECT_EQ(qs[0].scene, 7u);
  EXPECT_EQ(qs[0].object.entities, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(qs[0].object.count(), box_to_mask(s.entities[1].bbox, g).count() * 2);
  EXPECT_FALSE(qs[0].subject_ambiguous);
  EXPECT_TRUE(qs[0].object_ambiguous);
  EXPECT_EQ(qs[1].query, (Query{1, kLeft, 1}));
  EXPECT_EQ(qs[1].subject.entities, (std::vector<std::size_t>{1}));
  EXPECT_EQ(qs[1].object.entities, (std::vector<std::size_t>{2}));
}

TEST(Io, DatasetRoundTrip) {
  const Vocabulary v = Vocabulary::standard();
  const auto scenes = generate_split(GenConfig{}, 9, 25, "rt");
  const fs::path dir = scratch("roundtrip");
  save_dataset(dir, scenes, v);
  EXPECT_TRUE(fs::exists(dir / "rasters" / "rt_000003.ppm"));
  EXPECT_EQ(load_dataset(dir, v), scenes);
  const Tensor img = read_netpbm(dir / "rasters" / "rt_000003.ppm");
  const Tensor ref = rasterize(scenes[3], v);
  ASSERT_EQ(img.shape(), ref.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(img[i], ref[i], 0.5 / 255 + 1e-6);
  fs::remove_all(dir);
}

TEST(Io, RejectsMalformedRecords) {
  const Vocabulary v = Vocabulary::standard();
  const fs::path dir = scratch("bad");
  write_text_file(dir / "scenes.ndjson",
                  R"({"id":"a","width":64,"height":64,"seed":1,"entities":[{"category":"pink blob","bbox":[1,1,5,5]}],"relationships":[]})"
                  "\n");
  EXPECT_THROW(load_dataset(dir, v), ValidationError);
  EXPECT_THROW(load_dataset(dir / "missing", v), IoError);
  fs::remove_all(dir);
}

TEST(Io, ConfigRoundTrip) {
  GenConfig c;
  c.ambiguous_fraction = 0.25;
  c.train = 17;
  const GenConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.ambiguous_fraction, 0.25);
  EXPECT_EQ(back.train, 17u);
  EXPECT_EQ(back.vocab, c.vocab);
  EXPECT_THROW(config_from_json({{"margin", -1}}), ConfigError);
}

TEST(Raster, BackgroundAndShapes) {
  const Vocabulary v = Vocabulary::standard();
  Scene s;
  s.width = s.height = 64;
  s.entities = {{v.category("red square"), {10, 10, 20, 20}}, {v.category("blue circle"), {30, 30, 46, 46}}};
  const Tensor img = rasterize(s, v);
  EXPECT_EQ(img.at(0, 0, 0), 0.5f);
  EXPECT_GT(img.at(15, 15, 0), 0.8f);
  EXPECT_GT(img.at(38, 38, 2), 0.8f);
  EXPECT_EQ(img.at(30, 30, 2), 0.5f);  // circle corner stays background
  EXPECT_EQ(rasterize(s, v), img);
}

TEST(StatKernels, DeltaHistogram) {
  const auto g = GridGeometry::make(64, 14);
  std::vector<Scene> scenes;
  for (int i = 0; i < 5; ++i) {
    Scene s;
    s.width = s.height = 64;
    const int row = 4 + 4 * (2 + i) + 2, col = 4 + 4 * (1 + i) + 2;
    s.entities = {at_center(0, col, row, 2), at_center(1, col + 12, row, 2)};
    s.relationships = {{0, kLeft, 1}};
    scenes.push_back(s);
  }
  std::vector<std::string> warnings;
  const ShiftKernels k = estimate_spatial_shift_kernels(scenes, g, 4, &warnings);
  EXPECT_EQ(k.forward[kLeft].at(13, 13 + 3), 1.0f);
  EXPECT_EQ(k.inverse(kLeft).at(13, 13 - 3), 1.0f);
  EXPECT_EQ(warnings.size(), 3u);
  for (const auto& t : k.forward) {
    double s = 0;
    for (float v : t.values()) {
      EXPECT_GE(v, 0.0f);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
  // applying the delta moves a unit cell three columns right
  Tensor m({14, 14});
  m.at(6, 4) = 1.0f;
  const Tensor moved = apply_offset_kernel(m, k.forward[kLeft]);
  EXPECT_EQ(moved.at(6, 7), 1.0f);
  EXPECT_NEAR(center_of_mass(moved).second, 7.0, 1e-12);
}

TEST(StatKernels, GeneratedDataSignsAndRotation) {
  const auto g = GridGeometry::make(64, 14);
  const auto scenes = generate_split(GenConfig{}, 17, 400, "k");
  const ShiftKernels k = estimate_spatial_shift_kernels(scenes, g, 4);
  auto com = [](const Tensor& t) {
    auto [r, c] = center_of_mass(t);
    return std::pair<double, double>{r - 13, c - 13};
  };
  EXPECT_GT(com(k.forward[kLeft]).second, 0.5);
  EXPECT_LT(com(k.forward[kRight]).second, -0.5);
  EXPECT_GT(com(k.forward[kAbove]).first, 0.5);
  EXPECT_LT(com(k.forward[kBelow]).first, -0.5);
  for (std::size_t p = 0; p < 4; ++p) {
    const Tensor inv = k.inverse(p);
    for (std::size_t r = 0; r < 27; ++r)
      for (std::size_t c = 0; c < 27; ++c) EXPECT_EQ(inv.at(r, c), k.forward[p].at(26 - r, 26 - c));
  }
}

}  // namespace
}  // namespace shiftlab::scene

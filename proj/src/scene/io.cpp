#include "shiftlab/scene/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shiftlab/scene/generate.hpp"

namespace shiftlab::scene {

namespace fs = std::filesystem;
using nlohmann::json;

json scene_to_json(const Scene& s, const Vocabulary& vocab) {
  json ents = json::array();
  for (const auto& e : s.entities) {
    ents.push_back({{"category", vocab.categories.at(static_cast<std::size_t>(e.category))},
                    {"bbox", {e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1}}});
  }
  json rels = json::array();
  for (const auto& r : s.relationships) {
    rels.push_back(
        {{"s", r.subject}, {"p", vocab.predicates.at(static_cast<std::size_t>(r.predicate))}, {"o", r.object}});
  }
  return {{"id", s.id},        {"width", s.width},     {"height", s.height},
          {"seed", s.seed},    {"entities", ents},     {"relationships", rels}};
}

Scene scene_from_json(const json& j, const Vocabulary& vocab) {
  try {
    Scene s;
    s.id = j.at("id").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("entities")) {
      const auto& b = e.at("bbox");
      if (b.size() != 4) throw ValidationError("bbox needs 4 coordinates");
      Entity ent{vocab.category(e.at("category").get<std::string>()),
                 {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()}};
      if (!(0 <= ent.bbox.x0 && ent.bbox.x0 < ent.bbox.x1 && ent.bbox.x1 <= s.width &&
            0 <= ent.bbox.y0 && ent.bbox.y0 < ent.bbox.y1 && ent.bbox.y1 <= s.height)) {
        throw ValidationError("bbox outside the image");
      }
      s.entities.push_back(ent);
    }
    for (const auto& r : j.at("relationships")) {
      Relationship rel{r.at("s").get<std::size_t>(), vocab.predicate(r.at("p").get<std::string>()),
                       r.at("o").get<std::size_t>()};
      if (rel.subject >= s.entities.size() || rel.object >= s.entities.size() ||
          rel.subject == rel.object) {
        throw ValidationError("relationship indices invalid");
      }
      s.relationships.push_back(rel);
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scene record: ") + e.what());
  }
}

json config_to_json(const GenConfig& c) {
  return {{"image_size", c.image_size},
          {"grid", c.grid},
          {"min_entities", c.min_entities},
          {"max_entities", c.max_entities},
          {"min_box", c.min_box},
          {"max_box", c.max_box},
          {"ambiguous_fraction", c.ambiguous_fraction},
          {"max_overlap", c.max_overlap},
          {"margin", c.margin},
          {"max_attempts", c.max_attempts},
          {"train", c.train},
          {"val", c.val},
          {"test", c.test},
          {"categories", c.vocab.categories},
          {"predicates", c.vocab.predicates}};
}

GenConfig config_from_json(const json& j) {
  GenConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("image_size", c.image_size);
    get("grid", c.grid);
    get("min_entities", c.min_entities);
    get("max_entities", c.max_entities);
    get("min_box", c.min_box);
    get("max_box", c.max_box);
    get("ambiguous_fraction", c.ambiguous_fraction);
    get("max_overlap", c.max_overlap);
    get("margin", c.margin);
    get("max_attempts", c.max_attempts);
    get("train", c.train);
    get("val", c.val);
    get("test", c.test);
    get("categories", c.vocab.categories);
    get("predicates", c.vocab.predicates);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_dataset(const fs::path& dir, const std::vector<Scene>& scenes, const Vocabulary& vocab,
                  bool rasters) {
  std::ostringstream lines;
  for (const auto& s : scenes) lines << scene_to_json(s, vocab).dump() << '\n';
  write_text_file(dir / "scenes.ndjson", lines.str());
  if (rasters) {
    for (const auto& s : scenes) write_ppm(dir / "rasters" / (s.id + ".ppm"), rasterize(s, vocab));
  }
}

std::vector<Scene> load_dataset(const fs::path& dir, const Vocabulary& vocab) {
  const fs::path file = dir / "scenes.ndjson";
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<Scene> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(scene_from_json(json::parse(line), vocab));
    } catch (const json::exception& e) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void write_netpbm(const fs::path& path, const char* magic, std::size_t w, std::size_t h,
                  const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_pgm(const fs::path& path, const Tensor& map) {
  require_rank(map.shape(), 2, "pgm map");
  const auto v = map.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  std::vector<unsigned char> bytes(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    bytes[i] = range > 0 ? to_byte((static_cast<double>(v[i]) - *lo) / range) : 0;
  }
  write_netpbm(path, "P5", map.dim(1), map.dim(0), bytes);
}

void write_ppm(const fs::path& path, const Tensor& image) {
  require_rank(image.shape(), 3, "ppm image");
  require_shape(image.shape(), {image.dim(0), image.dim(1), 3}, "ppm image");
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) bytes[i] = to_byte(image[i]);
  write_netpbm(path, "P6", image.dim(1), image.dim(0), bytes);
}

Tensor read_netpbm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if ((magic != "P5" && magic != "P6") || maxval != 255 || w == 0 || h == 0) {
    throw ValidationError(path.string() + ": unsupported netpbm header");
  }
  const std::size_t c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> bytes(w * h * c);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError(path.string() + ": truncated pixel data");
  std::vector<float> values(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) values[i] = bytes[i] / 255.0f;
  return c == 3 ? Tensor({h, w, 3}, std::move(values)) : Tensor({h, w}, std::move(values));
}

}  // namespace shiftlab::scene

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftlab/scene/scene.hpp"

namespace shiftlab::scene {

nlohmann::json scene_to_json(const Scene& scene, const Vocabulary& vocab);
Scene scene_from_json(const nlohmann::json& j, const Vocabulary& vocab);  // ValidationError

nlohmann::json config_to_json(const GenConfig& config);
GenConfig config_from_json(const nlohmann::json& j);  // ConfigError

// <dir>/scenes.ndjson, plus <dir>/rasters/<id>.ppm when rasters is set.
void save_dataset(const std::filesystem::path& dir, const std::vector<Scene>& scenes,
                  const Vocabulary& vocab, bool rasters = true);
std::vector<Scene> load_dataset(const std::filesystem::path& dir, const Vocabulary& vocab);

// Binary netpbm. The PGM writer min-max normalizes a rank-2 map to 0..255
// (a constant map writes zeros); the PPM writer clamps H x W x 3 in [0, 1].
void write_pgm(const std::filesystem::path& path, const Tensor& map);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
// Returns H x W (PGM) or H x W x 3 (PPM) with values / 255.
Tensor read_netpbm(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);   // IoError / ValidationError
void write_text_file(const std::filesystem::path& path, const std::string& text);  // IoError

}  // namespace shiftlab::scene

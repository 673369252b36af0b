#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftlab/scene/scene.hpp"

namespace shiftlab::cli {

namespace fs = std::filesystem;

// Experiment file: {"generate": {...}, "model": {...}, "train": {...}};
// every section is optional and falls back to defaults.
nlohmann::json read_experiment_config(const std::optional<fs::path>& path);

// Dataset directory: config.json plus train/, val/, test/ each holding
// scenes.ndjson and rasters/.
struct Dataset {
  scene::GenConfig config;
  std::vector<scene::Scene> train, val, test;
  const std::vector<scene::Scene>& split(const std::string& name) const;  // ConfigError
};
Dataset load_data(const fs::path& dir);

struct GenerateOptions {
  std::optional<fs::path> config;
  fs::path out;
  std::uint64_t seed = 0;
  // Total scene count, divided between the splits in the configured ratio.
  std::optional<std::size_t> count;
  bool rasters = true;
};
void cmd_generate(const GenerateOptions& o, std::ostream& log);

struct TrainOptions {
  std::string model = "ssas";
  fs::path data;
  std::optional<fs::path> config;
  fs::path out;
  std::uint64_t seed = 0;
  std::optional<int> iterations;
  std::optional<double> mask_rate;
  std::optional<int> epochs;
  std::optional<fs::path> log;  // default: <out>.log.csv
};
void cmd_train(const TrainOptions& o, std::ostream& log);

struct EvalOptions {
  fs::path ckpt;
  fs::path data;
  std::string split = "test";
  std::string mask = "none";
  std::optional<fs::path> out;  // default: <ckpt dir>/eval_<split>_<mask>
  std::optional<double> tau;    // skips selection on the validation split
};
// Returns the summary also written to <out>/summary.json.
nlohmann::json cmd_eval(const EvalOptions& o, std::ostream& log);

struct VisualizeOptions {
  fs::path ckpt;
  fs::path data;
  std::string scene;
  std::string query;  // "subject,predicate,object"; "_" masks a slot
  fs::path out;
};
void cmd_visualize(const VisualizeOptions& o, std::ostream& log);

struct RenderKernelOptions {
  fs::path ckpt;
  std::string predicate;
  fs::path out;
};
nlohmann::json cmd_render_shift_kernel(const RenderKernelOptions& o, std::ostream& log);

struct SaccadeOptions {
  fs::path ckpt;
  fs::path data;
  std::string scene;
  fs::path graph;
  fs::path out;
};
nlohmann::json cmd_saccade(const SaccadeOptions& o, std::ostream& log);

// Parses argv and dispatches. Exit codes: 0 ok, 2 configuration or input
// error, 3 numeric failure, 4 I/O error, 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shiftlab::cli

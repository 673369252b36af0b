#include "shiftlab/model/config.hpp"

#include <cmath>

namespace shiftlab::model {

using nlohmann::json;

Kind kind_from_string(const std::string& s) {
  if (s == "ssas") return Kind::kSsas;
  if (s == "cooccur") return Kind::kCooccurrence;
  if (s == "vrd") return Kind::kVrd;
  if (s == "spatialshift") return Kind::kSpatialShift;
  throw ConfigError("unknown model kind '" + s + "' (expected ssas, cooccur, vrd, spatialshift)");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::kSsas: return "ssas";
    case Kind::kCooccurrence: return "cooccur";
    case Kind::kVrd: return "vrd";
    case Kind::kSpatialShift: return "spatialshift";
  }
  return "?";
}

bool reach_ok(int shift_layers, int kernel_size, int grid) {
  return static_cast<long>(shift_layers) * kernel_size > grid;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (categories == 0 || predicates == 0) fail("vocabularies must be non-empty");
  encoder.validate(categories);
  if (iterations < 0) fail("iterations must be >= 0");
  if (kind == Kind::kSsas) {
    if (kernel_size <= 0 || kernel_size % 2 == 0) fail("kernel_size must be a positive odd integer");
    if (shift_layers < 1) fail("shift_layers must be >= 1");
    if (shift_channels < 1) fail("shift_channels must be >= 1");
    if (!reach_ok(shift_layers, kernel_size, encoder.grid)) {
      fail("shift stack too shallow: need n > L / k, got n=" + std::to_string(shift_layers) +
           ", k=" + std::to_string(kernel_size) + ", L=" + std::to_string(encoder.grid));
    }
  }
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) fail("decay_factor must lie in (0, 1)");
  if (plateau_patience < 1) fail("plateau_patience must be >= 1");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) fail("mask_rate must lie in [0, 1]");
}

json to_json(const ModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"categories", c.categories},
          {"predicates", c.predicates},
          {"encoder",
           {{"mode", encoder::to_string(c.encoder.mode)},
            {"image_size", c.encoder.image_size},
            {"grid", c.encoder.grid},
            {"channels", c.encoder.channels},
            {"width1", c.encoder.width1},
            {"width2", c.encoder.width2}}},
          {"shift_layers", c.shift_layers},
          {"kernel_size", c.kernel_size},
          {"shift_channels", c.shift_channels},
          {"iterations", c.iterations},
          {"output_offset", c.output_offset},
          {"intermediate_supervision", c.intermediate_supervision}};
}

namespace {
template <typename V>
void read(const json& j, const char* key, V& field) {
  if (j.contains(key)) field = j.at(key).get<V>();
}
}  // namespace

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    if (j.contains("kind")) c.kind = kind_from_string(j.at("kind").get<std::string>());
    read(j, "categories", c.categories);
    read(j, "predicates", c.predicates);
    c.encoder = encoder::EncoderConfig::oracle(c.categories);
    if (j.contains("encoder")) {
      const json& e = j.at("encoder");
      if (e.contains("mode")) c.encoder.mode = encoder::mode_from_string(e.at("mode").get<std::string>());
      if (c.encoder.mode == encoder::Mode::kTrainable) c.encoder.channels = 32;
      read(e, "image_size", c.encoder.image_size);
      read(e, "grid", c.encoder.grid);
      read(e, "channels", c.encoder.channels);
      read(e, "width1", c.encoder.width1);
      read(e, "width2", c.encoder.width2);
    }
    read(j, "shift_layers", c.shift_layers);
    read(j, "kernel_size", c.kernel_size);
    read(j, "shift_channels", c.shift_channels);
    read(j, "iterations", c.iterations);
    read(j, "output_offset", c.output_offset);
    read(j, "intermediate_supervision", c.intermediate_supervision);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"decay_factor", c.decay_factor},
          {"plateau_patience", c.plateau_patience},
          {"mask_rate", c.mask_rate},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "learning_rate", c.learning_rate);
    read(j, "decay_factor", c.decay_factor);
    read(j, "plateau_patience", c.plateau_patience);
    read(j, "mask_rate", c.mask_rate);
    read(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace shiftlab::model

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "shiftlab/encoder/encoder.hpp"

namespace shiftlab::model {

enum class Kind { kSsas, kCooccurrence, kVrd, kSpatialShift };

Kind kind_from_string(const std::string& s);  // ConfigError
std::string to_string(Kind k);

struct ModelConfig {
  Kind kind = Kind::kSsas;
  std::size_t categories = 12;
  std::size_t predicates = 4;
  encoder::EncoderConfig encoder = encoder::EncoderConfig::oracle(12);
  // Shift stacks: n convolutions of k x k, hidden width c, 1 -> c -> ... -> c -> 1.
  int shift_layers = 3;
  int kernel_size = 5;
  int shift_channels = 10;
  int iterations = 2;
  // Learned scalar added to each role's final logits before loss and scoring.
  bool output_offset = true;
  // Also supervise every earlier iteration's maps (SSAS only).
  bool intermediate_supervision = false;

  std::size_t grid() const { return static_cast<std::size_t>(encoder.grid); }
  std::size_t channels() const { return static_cast<std::size_t>(encoder.channels); }
  // ConfigError on any inconsistency, including n <= L / k.
  void validate() const;
};

// n > L / k, compared exactly as n * k > L.
bool reach_ok(int shift_layers, int kernel_size, int grid);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double decay_factor = 0.7;
  int plateau_patience = 3;
  double mask_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace shiftlab::model

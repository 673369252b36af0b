#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftlab/model/model.hpp"

namespace shiftlab::cli {

// Binary layout, all integers little-endian:
//   "SSAS0001"
//   u64 metadata length, UTF-8 JSON metadata
//   u32 array count, then per array:
//     u32 name length, name, u32 rank, u64 dims[rank], f32 values (row-major)
struct Checkpoint {
  nlohmann::json meta;
  ParamStore<float> arrays;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'A', 'S', '0', '0', '0', '1'};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);  // IoError
Checkpoint load_checkpoint(const std::filesystem::path& path);                      // IoError, ValidationError

// Metadata: {"format","kind","model","train","vocab","seed","epoch","metrics"}.
Checkpoint make_checkpoint(const model::Model<float>& m, const scene::Vocabulary& vocab, const nlohmann::json& train,
                           std::uint64_t seed, int epoch, const nlohmann::json& metrics);

// Rebuilds the model from the config snapshot and loads every array. Missing,
// extra or reshaped arrays raise ValidationError.
std::unique_ptr<model::Model<float>> restore_model(const Checkpoint& ckpt);
scene::Vocabulary checkpoint_vocab(const Checkpoint& ckpt);

}  // namespace shiftlab::cli

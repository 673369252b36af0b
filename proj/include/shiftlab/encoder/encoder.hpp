#pragma once

#include <string>

#include "shiftlab/core/params.hpp"
#include "shiftlab/core/random.hpp"
#include "shiftlab/scene/scene.hpp"

namespace shiftlab::encoder {

enum class Mode { kOracle, kTrainable };

Mode mode_from_string(const std::string& s);  // ConfigError
std::string to_string(Mode m);

struct EncoderConfig {
  Mode mode = Mode::kOracle;
  int image_size = 64;
  int grid = 14;
  // Oracle: category count + 1 (background). Trainable: free, default 32.
  int channels = 13;
  int width1 = 8, width2 = 16;

  static EncoderConfig oracle(std::size_t categories, int image_size = 64, int grid = 14);
  static EncoderConfig trainable(int channels = 32, int image_size = 64, int grid = 14);
  // ConfigError: oracle needs channels == categories + 1; trainable needs the
  // image to survive two 2x pools and still hold the grid after cropping.
  void validate(std::size_t categories) const;
};

// Channel c < K at cell (i, j) is the fraction of the cell's pixels whose
// top-most entity box (last in paint order) has category c; channel K is the
// uncovered fraction. Every cell sums to one.
Tensor oracle_encode(const scene::Scene& scene, const scene::GridGeometry& geometry,
                     std::size_t categories);

// Three conv(k=3)+bias+ReLU layers, 3 -> width1 -> width2 -> C, with a 2x
// average pool after the first two, then a center crop to grid x grid.
struct CnnLayout {
  std::size_t first = 0;  // index of enc.conv1.w; six consecutive entries
};

template <typename T>
CnnLayout add_cnn_params(ParamStore<T>& store, const EncoderConfig& config, Rng& rng);

template <typename T>
struct CnnCache {
  BasicTensor<T> input, z1, p1, z2, p2, z3;
};

template <typename T>
BasicTensor<T> cnn_encode(const BasicTensor<T>& image, const ParamStore<T>& params, CnnLayout layout,
                          std::size_t grid, CnnCache<T>* cache = nullptr);

template <typename T>
void cnn_encode_backward(const CnnCache<T>& cache, const BasicTensor<T>& grad_mu,
                         const ParamStore<T>& params, CnnLayout layout, GradStore& grads);

}  // namespace shiftlab::encoder

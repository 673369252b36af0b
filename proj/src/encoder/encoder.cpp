#include "shiftlab/encoder/encoder.hpp"

#include <cmath>

#include "shiftlab/core/ops.hpp"

namespace shiftlab::encoder {

Mode mode_from_string(const std::string& s) {
  if (s == "oracle") return Mode::kOracle;
  if (s == "trainable") return Mode::kTrainable;
  throw ConfigError("unknown encoder mode '" + s + "'");
}

std::string to_string(Mode m) { return m == Mode::kOracle ? "oracle" : "trainable"; }

EncoderConfig EncoderConfig::oracle(std::size_t categories, int image_size, int grid) {
  EncoderConfig c;
  c.mode = Mode::kOracle;
  c.channels = static_cast<int>(categories) + 1;
  c.image_size = image_size;
  c.grid = grid;
  return c;
}

EncoderConfig EncoderConfig::trainable(int channels, int image_size, int grid) {
  EncoderConfig c;
  c.mode = Mode::kTrainable;
  c.channels = channels;
  c.image_size = image_size;
  c.grid = grid;
  return c;
}

void EncoderConfig::validate(std::size_t categories) const {
  if (grid <= 0 || channels <= 0) throw ConfigError("encoder: grid and channels must be positive");
  if (mode == Mode::kOracle) {
    scene::GridGeometry::make(image_size, grid);
    if (static_cast<std::size_t>(channels) != categories + 1) {
      throw ConfigError("oracle encoder: channels must equal categories + 1 (" +
                        std::to_string(categories + 1) + "), got " + std::to_string(channels));
    }
    return;
  }
  if (width1 <= 0 || width2 <= 0) throw ConfigError("trainable encoder: layer widths must be positive");
  if (image_size % 4 != 0) {
    throw ConfigError("trainable encoder: image size " + std::to_string(image_size) +
                      " does not survive two 2x pools");
  }
  const int pooled = image_size / 4;
  if (pooled < grid || (pooled - grid) % 2 != 0) {
    throw ConfigError("trainable encoder: pooled size " + std::to_string(pooled) +
                      " cannot be center-cropped to grid " + std::to_string(grid));
  }
}

Tensor oracle_encode(const scene::Scene& s, const scene::GridGeometry& g, std::size_t categories) {
  const std::size_t W = static_cast<std::size_t>(s.width), H = static_cast<std::size_t>(s.height);
  std::vector<int> owner(W * H, -1);
  for (const auto& e : s.entities) {
    if (e.category < 0 || static_cast<std::size_t>(e.category) >= categories) {
      throw ValidationError("oracle encoder: entity category out of range");
    }
    for (int y = std::max(0, e.bbox.y0); y < std::min(s.height, e.bbox.y1); ++y)
      for (int x = std::max(0, e.bbox.x0); x < std::min(s.width, e.bbox.x1); ++x)
        owner[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)] = e.category;
  }
  const std::size_t L = static_cast<std::size_t>(g.grid), C = categories + 1;
  Tensor mu({L, L, C});
  const double per_pixel = 1.0 / (g.cell * g.cell);
  std::vector<int> counts(C);
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < L; ++c) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int dy = 0; dy < g.cell; ++dy) {
        for (int dx = 0; dx < g.cell; ++dx) {
          const std::size_t y = static_cast<std::size_t>(g.offset + static_cast<int>(r) * g.cell + dy);
          const std::size_t x = static_cast<std::size_t>(g.offset + static_cast<int>(c) * g.cell + dx);
          const int o = (y < H && x < W) ? owner[y * W + x] : -1;
          ++counts[o < 0 ? categories : static_cast<std::size_t>(o)];
        }
      }
      for (std::size_t ch = 0; ch < C; ++ch) mu.at(r, c, ch) = static_cast<float>(counts[ch] * per_pixel);
    }
  }
  return mu;
}

template <typename T>
CnnLayout add_cnn_params(ParamStore<T>& store, const EncoderConfig& config, Rng& rng) {
  const std::size_t w[4] = {3, static_cast<std::size_t>(config.width1),
                            static_cast<std::size_t>(config.width2),
                            static_cast<std::size_t>(config.channels)};
  CnnLayout layout{store.size()};
  for (std::size_t l = 0; l < 3; ++l) {
    const double bound = std::sqrt(3.0 / static_cast<double>(9 * w[l]));
    store.add("enc.conv" + std::to_string(l + 1) + ".w", uniform_tensor<T>({3, 3, w[l], w[l + 1]}, -bound, bound, rng));
    store.add("enc.conv" + std::to_string(l + 1) + ".b", BasicTensor<T>({w[l + 1]}));
  }
  return layout;
}

template <typename T>
BasicTensor<T> cnn_encode(const BasicTensor<T>& image, const ParamStore<T>& p, CnnLayout lay,
                          std::size_t grid, CnnCache<T>* cache) {
  require_rank(image.shape(), 3, "cnn_encode image");
  if (image.dim(0) % 4 != 0 || image.dim(1) % 4 != 0 || image.dim(0) / 4 < grid || image.dim(1) / 4 < grid) {
    throw ConfigError("cnn_encode: image " + shape_to_string(image.shape()) + " incompatible with grid " +
                      std::to_string(grid));
  }
  const std::size_t i = lay.first;
  BasicTensor<T> z1 = ops::add_channel_bias(ops::conv2d(image, p.at(i)), p.at(i + 1));
  BasicTensor<T> p1 = ops::avg_pool2(ops::relu(z1));
  BasicTensor<T> z2 = ops::add_channel_bias(ops::conv2d(p1, p.at(i + 2)), p.at(i + 3));
  BasicTensor<T> p2 = ops::avg_pool2(ops::relu(z2));
  BasicTensor<T> z3 = ops::add_channel_bias(ops::conv2d(p2, p.at(i + 4)), p.at(i + 5));
  BasicTensor<T> mu = ops::center_crop(ops::relu(z3), grid);
  if (cache) *cache = {image, std::move(z1), std::move(p1), std::move(z2), std::move(p2), std::move(z3)};
  return mu;
}

template <typename T>
void cnn_encode_backward(const CnnCache<T>& c, const BasicTensor<T>& grad_mu, const ParamStore<T>& p,
                         CnnLayout lay, GradStore& grads) {
  const std::size_t i = lay.first;
  BasicTensor<T> g = ops::relu_backward(c.z3, ops::center_crop_backward(grad_mu, c.z3.shape()));
  ops::add_channel_bias_backward(g, grads.slot(i + 5));
  BasicTensor<T> gp2;
  ops::conv2d_backward(c.p2, p.at(i + 4), g, &gp2, grads.slot(i + 4));
  g = ops::relu_backward(c.z2, ops::avg_pool2_backward(gp2));
  ops::add_channel_bias_backward(g, grads.slot(i + 3));
  BasicTensor<T> gp1;
  ops::conv2d_backward(c.p1, p.at(i + 2), g, &gp1, grads.slot(i + 2));
  g = ops::relu_backward(c.z1, ops::avg_pool2_backward(gp1));
  ops::add_channel_bias_backward(g, grads.slot(i + 1));
  ops::conv2d_backward<T>(c.input, p.at(i), g, nullptr, grads.slot(i));
}

#define SHIFTLAB_INSTANTIATE(T)                                                                    \
  template CnnLayout add_cnn_params<T>(ParamStore<T>&, const EncoderConfig&, Rng&);                \
  template BasicTensor<T> cnn_encode<T>(const BasicTensor<T>&, const ParamStore<T>&, CnnLayout,    \
                                        std::size_t, CnnCache<T>*);                                \
  template void cnn_encode_backward<T>(const CnnCache<T>&, const BasicTensor<T>&,                  \
                                       const ParamStore<T>&, CnnLayout, GradStore&);
SHIFTLAB_INSTANTIATE(float)
SHIFTLAB_INSTANTIATE(double)
#undef SHIFTLAB_INSTANTIATE

}  // namespace shiftlab::encoder

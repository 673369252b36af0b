#include "shiftlab/core/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

namespace shiftlab {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

void require_rank(const Shape& actual, std::size_t rank, const std::string& what) {
  if (actual.size() != rank) {
    throw DimensionError(what + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_to_string(actual));
  }
}

void require_shape(const Shape& actual, const Shape& expected, const std::string& what) {
  require_rank(actual, expected.size(), what);
  for (std::size_t axis = 0; axis < expected.size(); ++axis) {
    if (actual[axis] != expected[axis]) {
      throw DimensionError(what + ": axis " + std::to_string(axis) + " is " +
                           std::to_string(actual[axis]) + ", expected " +
                           std::to_string(expected[axis]));
    }
  }
}

}  // namespace shiftlab

namespace shiftlab::ops {
namespace {

void require_axis(std::size_t actual, std::size_t expected, const std::string& what,
                  std::size_t axis) {
  if (actual != expected) {
    throw DimensionError(what + ": axis " + std::to_string(axis) + " is " +
                         std::to_string(actual) + ", expected " + std::to_string(expected));
  }
}

template <typename T>
void check_conv_shapes(const BasicTensor<T>& input, const BasicTensor<T>& kernel) {
  require_rank(input.shape(), 3, "conv2d input");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  const std::size_t k = kernel.dim(0);
  require_axis(kernel.dim(1), k, "conv2d kernel (must be square)", 1);
  if (k % 2 == 0) throw DimensionError("conv2d kernel: axis 0 extent must be odd");
  require_axis(kernel.dim(2), input.dim(2), "conv2d kernel input channels vs input", 2);
}

}  // namespace

template <typename T>
BasicTensor<T> from_accumulator(const Shape& shape, std::span<const double> acc) {
  std::vector<T> values(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) values[i] = static_cast<T>(acc[i]);
  return BasicTensor<T>(shape, std::move(values));
}

namespace {

struct ConvDims {
  std::size_t h, w, c_in, k, c_out;
  long r;
};

// One 64-byte vector of A; loads and stores go through memcpy (unaligned).
template <typename A>
struct VecOf;
template <>
struct VecOf<float> {
  typedef float type __attribute__((vector_size(64)));
};
template <>
struct VecOf<double> {
  typedef double type __attribute__((vector_size(64)));
};
template <typename A>
using Vec = typename VecOf<A>::type;
template <typename A>
constexpr std::size_t kVec = 64 / sizeof(A);

template <typename A>
inline Vec<A> load(const A* p) {
  Vec<A> v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
template <typename A>
inline void store(A* p, const Vec<A>& v) {
  std::memcpy(p, &v, sizeof v);
}

inline std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// Channel-planar, zero-padded layout. Plane c holds the (h + 2r) x (w + 2r)
// padded image at row stride wp, followed by a zero tail so that any tap
// offset plus a full column block stays in bounds. Extended pixel
// q = y * wp + x (x < wp) addresses output row y, column x; columns x >= w
// are scratch.
struct Planar {
  std::size_t wp, extended, blocks, plane;
  Planar(const ConvDims& d, std::size_t lanes)
      : wp(d.w + 2 * static_cast<std::size_t>(d.r)),
        extended(d.h * wp),
        blocks(round_up(extended, lanes)),
        plane((d.k - 1) * wp + (d.k - 1) + blocks) {}
  std::size_t offset(std::size_t dh, std::size_t dw) const { return dh * wp + dw; }
};

// HWC tensor with `channels` channels into planar layout (origin at +r, +r).
template <typename T, typename A>
std::vector<A> to_planar(const T* src, std::size_t channels, const ConvDims& d, const Planar& pl) {
  std::vector<A> out(channels * pl.plane, A{});
  const std::size_t r = static_cast<std::size_t>(d.r);
  for (std::size_t y = 0; y < d.h; ++y)
    for (std::size_t x = 0; x < d.w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        out[c * pl.plane + (y + r) * pl.wp + x + r] = static_cast<A>(src[(y * d.w + x) * channels + c]);
  return out;
}

// Column block of the planar layout: enough vectors to keep eight tiles busy.
template <typename A>
constexpr std::size_t kBlock = 8 * kVec<A>;

// C[o][q] = sum_s M[o * S + s] * X[s][q] over one column block, RB rows.
// Narrow tiles take more columns so the accumulator count stays near 16.
template <typename A, std::size_t RB>
void fwd_tile(std::size_t S, const A* M, const A* const* X, std::size_t q0, A* C, std::size_t ldc) {
  constexpr std::size_t NV = RB >= 4 ? 2 : RB >= 2 ? 4 : 8;
  constexpr std::size_t Q = NV * kVec<A>;
  for (std::size_t qb = 0; qb < kBlock<A>; qb += Q) {
    Vec<A> acc[RB][NV] = {};
    for (std::size_t s = 0; s < S; ++s) {
      const A* x = X[s] + q0 + qb;
      Vec<A> xv[NV];
      for (std::size_t v = 0; v < NV; ++v) xv[v] = load(x + v * kVec<A>);
      for (std::size_t r = 0; r < RB; ++r) {
        const A m = M[r * S + s];
        for (std::size_t v = 0; v < NV; ++v) acc[r][v] += m * xv[v];
      }
    }
    for (std::size_t r = 0; r < RB; ++r)
      for (std::size_t v = 0; v < NV; ++v) store(C + r * ldc + q0 + qb + v * kVec<A>, acc[r][v]);
  }
}

template <typename A, std::size_t RB = 8>
void fwd_rows(std::size_t rows, std::size_t S, const A* M, const A* const* X, std::size_t blocks, A* C,
              std::size_t ldc) {
  if constexpr (RB > 0) {
    if (rows == RB) {
      for (std::size_t q0 = 0; q0 < blocks; q0 += kBlock<A>) fwd_tile<A, RB>(S, M, X, q0, C, ldc);
    } else {
      fwd_rows<A, RB - 1>(rows, S, M, X, blocks, C, ldc);
    }
  }
}

// Planar correlation: out[o][q] = sum_{tap, i} W[o][tap * ci + i] * in_i[q + offset(tap)].
template <typename A>
std::vector<A> planar_conv(const std::vector<A>& in, std::size_t ci, const std::vector<A>& weights_t,
                           std::size_t co, const ConvDims& d, const Planar& pl) {
  std::vector<const A*> rows;
  rows.reserve(d.k * d.k * ci);
  for (std::size_t dh = 0; dh < d.k; ++dh)
    for (std::size_t dw = 0; dw < d.k; ++dw)
      for (std::size_t i = 0; i < ci; ++i) rows.push_back(in.data() + i * pl.plane + pl.offset(dh, dw));
  const std::size_t S = rows.size();
  std::vector<A> out(co * pl.blocks);
  for (std::size_t o0 = 0; o0 < co; o0 += 8) {
    fwd_rows<A>(std::min<std::size_t>(8, co - o0), S, weights_t.data() + o0 * S, rows.data(), pl.blocks,
                out.data() + o0 * pl.blocks, pl.blocks);
  }
  return out;
}

// G[s][o] += sum_q X[s][q] * Y[o][q] for an SB x OB tile.
template <typename A, std::size_t SB, std::size_t OB>
void dot_tile(const A* const* X, const A* Y, std::size_t ldy, std::size_t blocks, double* G, std::size_t ldg) {
  constexpr std::size_t V = kVec<A>;
  Vec<A> acc[SB][OB] = {};
  for (std::size_t q0 = 0; q0 < blocks; q0 += V) {
    Vec<A> x[SB], y[OB];
    for (std::size_t s = 0; s < SB; ++s) x[s] = load(X[s] + q0);
    for (std::size_t o = 0; o < OB; ++o) y[o] = load(Y + o * ldy + q0);
    for (std::size_t s = 0; s < SB; ++s)
      for (std::size_t o = 0; o < OB; ++o) acc[s][o] += x[s] * y[o];
  }
  for (std::size_t s = 0; s < SB; ++s)
    for (std::size_t o = 0; o < OB; ++o) {
      A t = 0;
      for (std::size_t q = 0; q < V; ++q) t += acc[s][o][q];
      G[s * ldg + o] += static_cast<double>(t);
    }
}

template <typename A, std::size_t SB, std::size_t OB = 4>
void dot_cols(std::size_t cols, const A* const* X, const A* Y, std::size_t ldy, std::size_t blocks, double* G,
              std::size_t ldg) {
  if constexpr (OB > 0) {
    if (cols == OB) {
      dot_tile<A, SB, OB>(X, Y, ldy, blocks, G, ldg);
    } else {
      dot_cols<A, SB, OB - 1>(cols, X, Y, ldy, blocks, G, ldg);
    }
  }
}

template <typename A, std::size_t SB = 4>
void dot_rows(std::size_t rows, std::size_t co, const A* const* X, const A* Y, std::size_t ldy, std::size_t blocks,
              double* G) {
  if constexpr (SB > 0) {
    if (rows == SB) {
      for (std::size_t o0 = 0; o0 < co; o0 += 4) {
        dot_cols<A, SB>(std::min<std::size_t>(4, co - o0), X, Y + o0 * ldy, ldy, blocks, G + o0, co);
      }
    } else {
      dot_rows<A, SB - 1>(rows, co, X, Y, ldy, blocks, G);
    }
  }
}

ConvDims conv_dims(const Shape& in, const Shape& kernel) {
  return {in[0], in[1], in[2], kernel[0], kernel[3], static_cast<long>(kernel[0] / 2)};
}

// Extended planar rows back to HWC.
template <typename T, typename A>
void from_planar_out(const std::vector<A>& ext, std::size_t channels, const ConvDims& d, const Planar& pl, T* dst) {
  for (std::size_t y = 0; y < d.h; ++y)
    for (std::size_t x = 0; x < d.w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        dst[(y * d.w + x) * channels + c] = static_cast<T>(ext[c * pl.blocks + y * pl.wp + x]);
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel) {
  check_conv_shapes(input, kernel);
  const ConvDims d = conv_dims(input.shape(), kernel.shape());
  const Planar pl(d, kBlock<T>);
  const std::size_t J = d.k * d.k * d.c_in;
  std::vector<T> wT(d.c_out * J);
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t o = 0; o < d.c_out; ++o) wT[o * J + j] = kernel[j * d.c_out + o];
  const std::vector<T> ext = planar_conv(to_planar<T, T>(input.data(), d.c_in, d, pl), d.c_in, wT, d.c_out, d, pl);
  BasicTensor<T> out({d.h, d.w, d.c_out});
  from_planar_out(ext, d.c_out, d, pl, out.data());
  return out;
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                     const BasicTensor<T>& grad_output, BasicTensor<T>* grad_input,
                     std::span<double> grad_kernel) {
  check_conv_shapes(input, kernel);
  const ConvDims d = conv_dims(input.shape(), kernel.shape());
  require_shape(grad_output.shape(), {d.h, d.w, d.c_out}, "conv2d grad_output");
  if (!grad_kernel.empty() && grad_kernel.size() != kernel.size()) {
    throw DimensionError("conv2d grad_kernel: accumulator size mismatch");
  }
  const Planar pl(d, kBlock<T>);
  const std::size_t k = d.k;

  if (grad_input) {
    // Correlation of the padded output gradient with the flipped, transposed kernel.
    const std::vector<T> g_pad = to_planar<T, T>(grad_output.data(), d.c_out, d, pl);
    const std::size_t J = k * k * d.c_out;
    std::vector<T> wT(d.c_in * J);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        for (std::size_t o = 0; o < d.c_out; ++o)
          for (std::size_t i = 0; i < d.c_in; ++i) {
            wT[i * J + (a * k + b) * d.c_out + o] = kernel.at(k - 1 - a, k - 1 - b, i, o);
          }
    const std::vector<T> ext = planar_conv(g_pad, d.c_out, wT, d.c_in, d, pl);
    BasicTensor<T> gin(input.shape());
    from_planar_out(ext, d.c_in, d, pl, gin.data());
    *grad_input = std::move(gin);
  }
  if (!grad_kernel.empty()) {
    const std::vector<T> in_pad = to_planar<T, T>(input.data(), d.c_in, d, pl);
    std::vector<T> g_ext(d.c_out * pl.blocks, T{});
    for (std::size_t y = 0; y < d.h; ++y)
      for (std::size_t x = 0; x < d.w; ++x)
        for (std::size_t o = 0; o < d.c_out; ++o)
          g_ext[o * pl.blocks + y * pl.wp + x] = grad_output[(y * d.w + x) * d.c_out + o];
    std::vector<const T*> rows;
    for (std::size_t dh = 0; dh < k; ++dh)
      for (std::size_t dw = 0; dw < k; ++dw)
        for (std::size_t i = 0; i < d.c_in; ++i) rows.push_back(in_pad.data() + i * pl.plane + pl.offset(dh, dw));
    for (std::size_t s0 = 0; s0 < rows.size(); s0 += 4) {
      dot_rows<T>(std::min<std::size_t>(4, rows.size() - s0), d.c_out, rows.data() + s0, g_ext.data(), pl.blocks,
                  pl.blocks, grad_kernel.data() + s0 * d.c_out);
    }
  }
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output) {
  Conv2dGrads<T> out;
  std::vector<double> gk(kernel.size(), 0.0);
  conv2d_backward(input, kernel, grad_output, &out.input, std::span<double>(gk));
  out.kernel = from_accumulator<T>(kernel.shape(), gk);
  return out;
}

template <typename T>
BasicTensor<T> add_channel_bias(const BasicTensor<T>& input, const BasicTensor<T>& bias) {
  require_rank(input.shape(), 3, "add_channel_bias input");
  require_shape(bias.shape(), {input.dim(2)}, "add_channel_bias bias");
  BasicTensor<T> out = input;
  const std::size_t c = input.dim(2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(out[i]) + static_cast<double>(bias[i % c]));
  }
  return out;
}

template <typename T>
void add_channel_bias_backward(const BasicTensor<T>& grad_output, std::span<double> grad_bias) {
  require_rank(grad_output.shape(), 3, "add_channel_bias grad_output");
  const std::size_t c = grad_output.dim(2);
  if (grad_bias.size() != c) throw DimensionError("add_channel_bias grad_bias: size mismatch");
  for (std::size_t i = 0; i < grad_output.size(); ++i) grad_bias[i % c] += grad_output[i];
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                     const BasicTensor<T>& bias) {
  require_rank(input.shape(), 1, "dense input");
  require_rank(weights.shape(), 2, "dense weights");
  require_axis(weights.dim(0), input.dim(0), "dense weights rows vs input", 0);
  require_shape(bias.shape(), {weights.dim(1)}, "dense bias");
  const std::size_t d_in = weights.dim(0), d_out = weights.dim(1);
  std::vector<double> acc(d_out);
  for (std::size_t o = 0; o < d_out; ++o) acc[o] = bias[o];
  for (std::size_t i = 0; i < d_in; ++i) {
    const double v = input[i];
    const T* row = weights.data() + i * d_out;
    for (std::size_t o = 0; o < d_out; ++o) acc[o] += v * static_cast<double>(row[o]);
  }
  return from_accumulator<T>({d_out}, acc);
}

template <typename T>
void dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                    const BasicTensor<T>& grad_output, BasicTensor<T>* grad_input,
                    std::span<double> grad_weights, std::span<double> grad_bias) {
  require_rank(input.shape(), 1, "dense input");
  require_rank(weights.shape(), 2, "dense weights");
  require_axis(weights.dim(0), input.dim(0), "dense weights rows vs input", 0);
  require_shape(grad_output.shape(), {weights.dim(1)}, "dense grad_output");
  const std::size_t d_in = weights.dim(0), d_out = weights.dim(1);
  if (!grad_weights.empty() && grad_weights.size() != weights.size()) {
    throw DimensionError("dense grad_weights: accumulator size mismatch");
  }
  if (!grad_bias.empty() && grad_bias.size() != d_out) {
    throw DimensionError("dense grad_bias: accumulator size mismatch");
  }
  std::vector<double> gin(d_in, 0.0);
  for (std::size_t i = 0; i < d_in; ++i) {
    const T* row = weights.data() + i * d_out;
    double s = 0.0;
    for (std::size_t o = 0; o < d_out; ++o) {
      s += static_cast<double>(row[o]) * static_cast<double>(grad_output[o]);
    }
    gin[i] = s;
    if (!grad_weights.empty()) {
      const double v = input[i];
      double* gw = grad_weights.data() + i * d_out;
      for (std::size_t o = 0; o < d_out; ++o) gw[o] += v * static_cast<double>(grad_output[o]);
    }
  }
  if (!grad_bias.empty()) {
    for (std::size_t o = 0; o < d_out; ++o) grad_bias[o] += grad_output[o];
  }
  if (grad_input) *grad_input = from_accumulator<T>({d_in}, gin);
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_output) {
  DenseGrads<T> out;
  std::vector<double> gw(weights.size(), 0.0), gb(weights.dim(1), 0.0);
  dense_backward(input, weights, grad_output, &out.input, std::span<double>(gw),
                 std::span<double>(gb));
  out.weights = from_accumulator<T>(weights.shape(), gw);
  out.bias = from_accumulator<T>({weights.dim(1)}, gb);
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  out.drop_grad();
  for (auto& v : out.values()) v = v > T{} ? v : T{};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  require_shape(grad_output.shape(), input.shape(), "relu grad_output");
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T{} ? grad_output[i] : T{};
  }
  return out;
}

template <typename T>
T sigmoid(T z) {
  const double x = z;
  if (x >= 0.0) return static_cast<T>(1.0 / (1.0 + std::exp(-x)));
  const double e = std::exp(x);
  return static_cast<T>(e / (1.0 + e));
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  out.drop_grad();
  for (auto& v : out.values()) v = sigmoid(v);
  return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output) {
  require_shape(grad_output.shape(), output.shape(), "sigmoid grad_output");
  BasicTensor<T> out(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double s = output[i];
    out[i] = static_cast<T>(static_cast<double>(grad_output[i]) * s * (1.0 - s));
  }
  return out;
}

namespace {

template <typename T>
void check_broadcast(const BasicTensor<T>& map, const BasicTensor<T>& features) {
  require_rank(features.shape(), 3, "broadcast_mul features");
  if (map.rank() == 2) {
    require_shape(map.shape(), {features.dim(0), features.dim(1)}, "broadcast_mul map");
  } else {
    require_shape(map.shape(), {features.dim(0), features.dim(1), 1}, "broadcast_mul map");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> broadcast_mul(const BasicTensor<T>& map, const BasicTensor<T>& features) {
  check_broadcast(map, features);
  const std::size_t cells = map.size(), c = features.dim(2);
  BasicTensor<T> out(features.shape());
  for (std::size_t p = 0; p < cells; ++p) {
    const double m = map[p];
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[p * c + ch] = static_cast<T>(m * static_cast<double>(features[p * c + ch]));
    }
  }
  return out;
}

template <typename T>
void broadcast_mul_backward(const BasicTensor<T>& map, const BasicTensor<T>& features,
                            const BasicTensor<T>& grad_output, BasicTensor<T>* grad_map,
                            BasicTensor<T>* grad_features) {
  check_broadcast(map, features);
  require_shape(grad_output.shape(), features.shape(), "broadcast_mul grad_output");
  const std::size_t cells = map.size(), c = features.dim(2);
  if (grad_map) {
    BasicTensor<T> gm(map.shape());
    for (std::size_t p = 0; p < cells; ++p) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        s += static_cast<double>(grad_output[p * c + ch]) *
             static_cast<double>(features[p * c + ch]);
      }
      gm[p] = static_cast<T>(s);
    }
    *grad_map = std::move(gm);
  }
  if (grad_features) {
    BasicTensor<T> gf(features.shape());
    for (std::size_t p = 0; p < cells; ++p) {
      const double m = map[p];
      for (std::size_t ch = 0; ch < c; ++ch) {
        gf[p * c + ch] = static_cast<T>(m * static_cast<double>(grad_output[p * c + ch]));
      }
    }
    *grad_features = std::move(gf);
  }
}

template <typename T>
BasicTensor<T> channel_dot(const BasicTensor<T>& features, const BasicTensor<T>& vector) {
  require_rank(features.shape(), 3, "channel_dot features");
  require_shape(vector.shape(), {features.dim(2)}, "channel_dot vector");
  const std::size_t h = features.dim(0), w = features.dim(1), c = features.dim(2);
  BasicTensor<T> out({h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double s = 0.0;
    const T* f = features.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      s += static_cast<double>(f[ch]) * static_cast<double>(vector[ch]);
    }
    out[p] = static_cast<T>(s);
  }
  return out;
}

template <typename T>
void channel_dot_backward(const BasicTensor<T>& features, const BasicTensor<T>& vector,
                          const BasicTensor<T>& grad_output, BasicTensor<T>* grad_features,
                          std::span<double> grad_vector) {
  require_rank(features.shape(), 3, "channel_dot features");
  require_shape(vector.shape(), {features.dim(2)}, "channel_dot vector");
  const std::size_t h = features.dim(0), w = features.dim(1), c = features.dim(2);
  require_shape(grad_output.shape(), {h, w}, "channel_dot grad_output");
  if (!grad_vector.empty() && grad_vector.size() != c) {
    throw DimensionError("channel_dot grad_vector: accumulator size mismatch");
  }
  BasicTensor<T> gf;
  if (grad_features) gf = BasicTensor<T>(features.shape());
  for (std::size_t p = 0; p < h * w; ++p) {
    const double g = grad_output[p];
    if (g == 0.0) continue;
    const T* f = features.data() + p * c;
    if (!grad_vector.empty()) {
      for (std::size_t ch = 0; ch < c; ++ch) grad_vector[ch] += g * static_cast<double>(f[ch]);
    }
    if (grad_features) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        gf[p * c + ch] = static_cast<T>(g * static_cast<double>(vector[ch]));
      }
    }
  }
  if (grad_features) *grad_features = std::move(gf);
}

namespace {

template <typename T>
void check_binary_target(const BasicTensor<T>& logits, const BasicTensor<T>& target) {
  require_shape(target.shape(), logits.shape(), "bce_with_logits target");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != T{0} && target[i] != T{1}) {
      throw ValidationError("bce_with_logits: target value at index " + std::to_string(i) +
                            " is not 0 or 1");
    }
  }
}

}  // namespace

template <typename T>
double bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& target) {
  check_binary_target(logits, target);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double t = target[i];
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

template <typename T>
BasicTensor<T> bce_with_logits_backward(const BasicTensor<T>& logits,
                                        const BasicTensor<T>& target, double scale) {
  check_binary_target(logits, target);
  BasicTensor<T> out(logits.shape());
  const double norm = scale / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double s = sigmoid<double>(logits[i]);
    out[i] = static_cast<T>((s - static_cast<double>(target[i])) * norm);
  }
  return out;
}

template <typename T>
BasicTensor<T> avg_pool2(const BasicTensor<T>& input) {
  require_rank(input.shape(), 3, "avg_pool2 input");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (h % 2 || w % 2) throw DimensionError("avg_pool2 input: axis 0 and 1 must be even");
  BasicTensor<T> out({h / 2, w / 2, c});
  for (std::size_t i = 0; i < h / 2; ++i) {
    for (std::size_t j = 0; j < w / 2; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double s = static_cast<double>(input.at(2 * i, 2 * j, ch)) +
                         static_cast<double>(input.at(2 * i, 2 * j + 1, ch)) +
                         static_cast<double>(input.at(2 * i + 1, 2 * j, ch)) +
                         static_cast<double>(input.at(2 * i + 1, 2 * j + 1, ch));
        out.at(i, j, ch) = static_cast<T>(0.25 * s);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> avg_pool2_backward(const BasicTensor<T>& grad_output) {
  require_rank(grad_output.shape(), 3, "avg_pool2 grad_output");
  const std::size_t h = grad_output.dim(0), w = grad_output.dim(1), c = grad_output.dim(2);
  BasicTensor<T> out({2 * h, 2 * w, c});
  for (std::size_t i = 0; i < 2 * h; ++i) {
    for (std::size_t j = 0; j < 2 * w; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(i, j, ch) = static_cast<T>(0.25 * static_cast<double>(grad_output.at(i / 2, j / 2, ch)));
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> center_crop(const BasicTensor<T>& input, std::size_t size) {
  require_rank(input.shape(), 3, "center_crop input");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (size > h || size > w || (h - size) % 2 || (w - size) % 2) {
    throw DimensionError("center_crop: cannot take a centered " + std::to_string(size) +
                         " window from " + shape_to_string(input.shape()));
  }
  const std::size_t oh = (h - size) / 2, ow = (w - size) / 2;
  BasicTensor<T> out({size, size, c});
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) out.at(i, j, ch) = input.at(i + oh, j + ow, ch);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> center_crop_backward(const BasicTensor<T>& grad_output, const Shape& input_shape) {
  require_rank(grad_output.shape(), 3, "center_crop grad_output");
  require_rank(input_shape, 3, "center_crop input shape");
  const std::size_t size = grad_output.dim(0);
  const std::size_t oh = (input_shape[0] - size) / 2, ow = (input_shape[1] - size) / 2;
  BasicTensor<T> out(input_shape);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      for (std::size_t ch = 0; ch < input_shape[2]; ++ch) {
        out.at(i + oh, j + ow, ch) = grad_output.at(i, j, ch);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> concat(const std::vector<const BasicTensor<T>*>& parts) {
  std::vector<T> values;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    require_rank(parts[p]->shape(), 1, "concat part " + std::to_string(p));
    values.insert(values.end(), parts[p]->values().begin(), parts[p]->values().end());
  }
  const std::size_t n = values.size();
  return BasicTensor<T>({n}, std::move(values));
}

#define SHIFTLAB_INSTANTIATE_OPS(T)                                                          \
  template BasicTensor<T> from_accumulator<T>(const Shape&, std::span<const double>);       \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template void conv2d_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                   const BasicTensor<T>&, BasicTensor<T>*,                  \
                                   std::span<double>);                                      \
  template Conv2dGrads<T> conv2d_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,  \
                                             const BasicTensor<T>&);                        \
  template BasicTensor<T> add_channel_bias<T>(const BasicTensor<T>&, const BasicTensor<T>&); \
  template void add_channel_bias_backward<T>(const BasicTensor<T>&, std::span<double>);     \
  template BasicTensor<T> dense<T>(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                   const BasicTensor<T>&);                                  \
  template void dense_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                  const BasicTensor<T>&, BasicTensor<T>*, std::span<double>, \
                                  std::span<double>);                                       \
  template DenseGrads<T> dense_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                           const BasicTensor<T>&);                          \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                                   \
  template BasicTensor<T> relu_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template T sigmoid<T>(T);                                                                 \
  template BasicTensor<T> sigmoid<T>(const BasicTensor<T>&);                                \
  template BasicTensor<T> sigmoid_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> broadcast_mul<T>(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template void broadcast_mul_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,     \
                                          const BasicTensor<T>&, BasicTensor<T>*,           \
                                          BasicTensor<T>*);                                 \
  template BasicTensor<T> channel_dot<T>(const BasicTensor<T>&, const BasicTensor<T>&);     \
  template void channel_dot_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                        const BasicTensor<T>&, BasicTensor<T>*,             \
                                        std::span<double>);                                 \
  template double bce_with_logits<T>(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> bce_with_logits_backward<T>(const BasicTensor<T>&,                \
                                                      const BasicTensor<T>&, double);       \
  template BasicTensor<T> avg_pool2<T>(const BasicTensor<T>&);                              \
  template BasicTensor<T> avg_pool2_backward<T>(const BasicTensor<T>&);                     \
  template BasicTensor<T> center_crop<T>(const BasicTensor<T>&, std::size_t);               \
  template BasicTensor<T> center_crop_backward<T>(const BasicTensor<T>&, const Shape&);     \
  template BasicTensor<T> concat<T>(const std::vector<const BasicTensor<T>*>&);

SHIFTLAB_INSTANTIATE_OPS(float)
SHIFTLAB_INSTANTIATE_OPS(double)

#undef SHIFTLAB_INSTANTIATE_OPS

}  // namespace shiftlab::ops

#pragma once

#include <span>
#include <vector>

#include "shiftlab/core/tensor.hpp"

// Differentiable kernels with hand-written backward passes. Forward results
// are rounded once from 64-bit accumulators. Backward functions that take a
// `std::span<double>` add into it (gradient accumulation across a batch);
// the tensor-returning overloads are conveniences for tests and oracles.
namespace shiftlab::ops {

// ---- conv2d: H×W×Cin * k×k×Cin×Cout -> H×W×Cout, zero "same" padding ----

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel);

// `grad_input` may be null; `grad_kernel` may be empty.
template <typename T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                     const BasicTensor<T>& grad_output, BasicTensor<T>* grad_input,
                     std::span<double> grad_kernel);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output);

// ---- per-channel bias on H×W×C ----

template <typename T>
BasicTensor<T> add_channel_bias(const BasicTensor<T>& input, const BasicTensor<T>& bias);

template <typename T>
void add_channel_bias_backward(const BasicTensor<T>& grad_output, std::span<double> grad_bias);

// ---- dense: Din · Din×Dout + Dout ----

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                     const BasicTensor<T>& bias);

template <typename T>
void dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                    const BasicTensor<T>& grad_output, BasicTensor<T>* grad_input,
                    std::span<double> grad_weights, std::span<double> grad_bias);

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_output);

// ---- elementwise ----

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

// Passes gradient where input > 0 (zero subgradient at exactly 0).
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

template <typename T>
T sigmoid(T z);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output);

// ---- broadcast_mul: H×W×1 (or H×W) map times H×W×C features ----

template <typename T>
BasicTensor<T> broadcast_mul(const BasicTensor<T>& map, const BasicTensor<T>& features);

// Either output may be null.
template <typename T>
void broadcast_mul_backward(const BasicTensor<T>& map, const BasicTensor<T>& features,
                            const BasicTensor<T>& grad_output, BasicTensor<T>* grad_map,
                            BasicTensor<T>* grad_features);

// ---- channel dot: H×W×C · C -> H×W ----

template <typename T>
BasicTensor<T> channel_dot(const BasicTensor<T>& features, const BasicTensor<T>& vector);

template <typename T>
void channel_dot_backward(const BasicTensor<T>& features, const BasicTensor<T>& vector,
                          const BasicTensor<T>& grad_output, BasicTensor<T>* grad_features,
                          std::span<double> grad_vector);

// ---- binary cross-entropy on logits, mean over cells ----

// Throws ValidationError unless every target is exactly 0 or 1.
template <typename T>
double bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& target);

// Gradient of `scale * bce_with_logits(logits, target)` w.r.t. logits.
template <typename T>
BasicTensor<T> bce_with_logits_backward(const BasicTensor<T>& logits,
                                        const BasicTensor<T>& target, double scale = 1.0);

// ---- spatial plumbing for the trainable encoder ----

// 2×2 average pool with stride 2 on H×W×C; H and W must be even.
template <typename T>
BasicTensor<T> avg_pool2(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> avg_pool2_backward(const BasicTensor<T>& grad_output);

// Central size×size window of an H×W×C tensor; (H - size) must be even.
template <typename T>
BasicTensor<T> center_crop(const BasicTensor<T>& input, std::size_t size);

template <typename T>
BasicTensor<T> center_crop_backward(const BasicTensor<T>& grad_output, const Shape& input_shape);

// ---- vectors ----

template <typename T>
BasicTensor<T> concat(const std::vector<const BasicTensor<T>*>& parts);

// Rounds a 64-bit accumulator into a tensor of the given shape.
template <typename T>
BasicTensor<T> from_accumulator(const Shape& shape, std::span<const double> acc);

}  // namespace shiftlab::ops

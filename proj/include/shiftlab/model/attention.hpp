#pragma once

#include <span>
#include <vector>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab::model {

// L x L maps; activated = ReLU(logits).
template <typename T>
struct AttentionMap {
  BasicTensor<T> logits;
  BasicTensor<T> activated;
};

// logits(i, j) = sum_c mu(i, j, c) * embedding(c).
template <typename T>
AttentionMap<T> attend(const BasicTensor<T>& mu, const BasicTensor<T>& embedding);

// Backward from the gradient on logits. grad_mu is overwritten when non-null;
// grad_embedding accumulates.
template <typename T>
void attend_backward(const BasicTensor<T>& mu, const BasicTensor<T>& embedding,
                     const BasicTensor<T>& grad_logits, BasicTensor<T>* grad_mu,
                     std::span<double> grad_embedding);

template <typename T>
using KernelStack = std::vector<const BasicTensor<T>*>;

// Channels must chain 1 -> c1 -> ... -> 1 with equal odd k; ConfigError otherwise.
template <typename T>
void validate_stack(const KernelStack<T>& kernels);

template <typename T>
struct ShiftTrace {
  std::vector<BasicTensor<T>> inputs;  // stage inputs, L x L x c_{l-1}
  std::vector<BasicTensor<T>> pre;     // stage pre-activations, L x L x c_l
};

// n conv + ReLU stages on an L x L activated map. The last stage's
// pre-activation is the shifted logits.
template <typename T>
AttentionMap<T> shift(const BasicTensor<T>& activated, const KernelStack<T>& kernels,
                      ShiftTrace<T>* trace = nullptr);

// Gradient on the shifted logits -> gradient on the input activated map.
// grad_kernels[l] accumulates into stage l (skipped when empty).
template <typename T>
BasicTensor<T> shift_backward(const ShiftTrace<T>& trace, const KernelStack<T>& kernels,
                              const BasicTensor<T>& grad_logits,
                              const std::vector<std::span<double>>& grad_kernels);

}  // namespace shiftlab::model

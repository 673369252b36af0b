#include "shiftlab/model/attention.hpp"

#include <string>

#include "shiftlab/core/ops.hpp"

namespace shiftlab::model {

template <typename T>
AttentionMap<T> attend(const BasicTensor<T>& mu, const BasicTensor<T>& embedding) {
  require_rank(mu.shape(), 3, "attend features");
  require_shape(embedding.shape(), {mu.dim(2)}, "attend embedding");
  AttentionMap<T> out;
  out.logits = ops::channel_dot(mu, embedding);
  out.activated = ops::relu(out.logits);
  return out;
}

template <typename T>
void attend_backward(const BasicTensor<T>& mu, const BasicTensor<T>& embedding,
                     const BasicTensor<T>& grad_logits, BasicTensor<T>* grad_mu,
                     std::span<double> grad_embedding) {
  ops::channel_dot_backward(mu, embedding, grad_logits, grad_mu, grad_embedding);
}

template <typename T>
void validate_stack(const KernelStack<T>& kernels) {
  if (kernels.empty()) throw ConfigError("shift stack is empty");
  std::size_t channels = 1;
  const std::size_t k = kernels.front()->dim(0);
  for (std::size_t l = 0; l < kernels.size(); ++l) {
    const auto& s = kernels[l]->shape();
    const std::string where = "shift stage " + std::to_string(l);
    if (s.size() != 4 || s[0] != k || s[1] != k || k % 2 == 0) {
      throw ConfigError(where + ": kernel " + shape_to_string(s) + " is not k x k x cin x cout with odd k");
    }
    if (s[2] != channels) {
      throw ConfigError(where + ": expects " + std::to_string(s[2]) + " input channels, previous stage gives " +
                        std::to_string(channels));
    }
    channels = s[3];
  }
  if (channels != 1) throw ConfigError("shift stack must end with 1 channel, ends with " + std::to_string(channels));
}

template <typename T>
AttentionMap<T> shift(const BasicTensor<T>& activated, const KernelStack<T>& kernels, ShiftTrace<T>* trace) {
  require_rank(activated.shape(), 2, "shift input");
  const std::size_t h = activated.dim(0), w = activated.dim(1);
  BasicTensor<T> x = activated.reshaped({h, w, 1});
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  BasicTensor<T> z;
  for (std::size_t l = 0; l < kernels.size(); ++l) {
    z = ops::conv2d(x, *kernels[l]);
    if (trace) trace->inputs.push_back(std::move(x));
    x = ops::relu(z);
    if (trace) trace->pre.push_back(z);
  }
  AttentionMap<T> out;
  out.logits = std::move(z).reshaped({h, w});
  out.activated = std::move(x).reshaped({h, w});
  return out;
}

template <typename T>
BasicTensor<T> shift_backward(const ShiftTrace<T>& trace, const KernelStack<T>& kernels,
                              const BasicTensor<T>& grad_logits,
                              const std::vector<std::span<double>>& grad_kernels) {
  const std::size_t n = kernels.size();
  if (trace.inputs.size() != n || grad_kernels.size() != n) {
    throw DimensionError("shift_backward: trace and kernel stack lengths differ");
  }
  const std::size_t h = grad_logits.dim(0), w = grad_logits.dim(1);
  BasicTensor<T> g = grad_logits.reshaped({h, w, 1});
  for (std::size_t l = n; l-- > 0;) {
    BasicTensor<T> g_in;
    ops::conv2d_backward(trace.inputs[l], *kernels[l], g, &g_in, grad_kernels[l]);
    g = l > 0 ? ops::relu_backward(trace.pre[l - 1], g_in) : std::move(g_in);
  }
  return std::move(g).reshaped({h, w});
}

#define SHIFTLAB_INSTANTIATE(T)                                                                      \
  template AttentionMap<T> attend<T>(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template void attend_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                   const BasicTensor<T>&, BasicTensor<T>*, std::span<double>);       \
  template void validate_stack<T>(const KernelStack<T>&);                                            \
  template AttentionMap<T> shift<T>(const BasicTensor<T>&, const KernelStack<T>&, ShiftTrace<T>*);   \
  template BasicTensor<T> shift_backward<T>(const ShiftTrace<T>&, const KernelStack<T>&,             \
                                            const BasicTensor<T>&, const std::vector<std::span<double>>&);
SHIFTLAB_INSTANTIATE(float)
SHIFTLAB_INSTANTIATE(double)
#undef SHIFTLAB_INSTANTIATE

}  // namespace shiftlab::model

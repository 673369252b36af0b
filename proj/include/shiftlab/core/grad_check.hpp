#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

// |a - b| / max(1e-8, |a| + |b|)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

template <typename T>
using ScalarFn = std::function<double(const std::vector<BasicTensor<T>>&)>;

// Central differences of `f` w.r.t. every scalar of every input, compared
// against `analytic` (one tensor per input, same shapes).
template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, std::vector<BasicTensor<T>> inputs,
                           const std::vector<BasicTensor<T>>& analytic, double h);

// Same, restricted to (input, flat index) pairs.
template <typename T>
GradCheckResult grad_check_entries(const ScalarFn<T>& f, std::vector<BasicTensor<T>> inputs,
                                   const std::vector<BasicTensor<T>>& analytic,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& entries,
                                   double h);

}  // namespace shiftlab

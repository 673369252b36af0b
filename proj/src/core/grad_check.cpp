#include "shiftlab/core/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace shiftlab {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

template <typename T>
GradCheckResult grad_check_entries(const ScalarFn<T>& f, std::vector<BasicTensor<T>> inputs,
                                   const std::vector<BasicTensor<T>>& analytic,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& entries,
                                   double h) {
  if (analytic.size() != inputs.size()) {
    throw DimensionError("grad_check: one analytic gradient per input required");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    require_shape(analytic[i].shape(), inputs[i].shape(), "grad_check analytic gradient");
  }
  GradCheckResult result;
  for (auto [input, index] : entries) {
    auto& x = inputs.at(input)[index];
    const T original = x;
    x = static_cast<T>(static_cast<double>(original) + h);
    const T plus = x;
    const double f_plus = f(inputs);
    x = static_cast<T>(static_cast<double>(original) - h);
    const T minus = x;
    const double f_minus = f(inputs);
    x = original;
    const double numeric =
        (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
    const double a = analytic[input][index];
    const double err = relative_error(a, numeric);
    ++result.checked;
    if (result.checked == 1 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_input = input;
      result.worst_index = index;
      result.analytic = a;
      result.numeric = numeric;
    }
  }
  return result;
}

template <typename T>
GradCheckResult grad_check(const ScalarFn<T>& f, std::vector<BasicTensor<T>> inputs,
                           const std::vector<BasicTensor<T>>& analytic, double h) {
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) entries.emplace_back(i, j);
  }
  return grad_check_entries(f, std::move(inputs), analytic, entries, h);
}

template GradCheckResult grad_check<float>(const ScalarFn<float>&, std::vector<Tensor>,
                                           const std::vector<Tensor>&, double);
template GradCheckResult grad_check<double>(const ScalarFn<double>&,
                                            std::vector<BasicTensor<double>>,
                                            const std::vector<BasicTensor<double>>&, double);
template GradCheckResult grad_check_entries<float>(
    const ScalarFn<float>&, std::vector<Tensor>, const std::vector<Tensor>&,
    const std::vector<std::pair<std::size_t, std::size_t>>&, double);
template GradCheckResult grad_check_entries<double>(
    const ScalarFn<double>&, std::vector<BasicTensor<double>>,
    const std::vector<BasicTensor<double>>&,
    const std::vector<std::pair<std::size_t, std::size_t>>&, double);

}  // namespace shiftlab

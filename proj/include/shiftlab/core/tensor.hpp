#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shiftlab/core/error.hpp"

namespace shiftlab {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array. `T` is float for storage in models and checkpoints;
// double instantiations exist so finite-difference checks run at full
// precision through identical code.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), values_(checked_size(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != checked_size(shape_)) {
      throw DimensionError("tensor of shape " + shape_to_string(shape_) + " given " +
                           std::to_string(values_.size()) + " values");
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t dim(std::size_t axis) const {
    assert(axis < shape_.size());
    return shape_[axis];
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t i) {
    assert(i < values_.size());
    return values_[i];
  }
  const T& operator[](std::size_t i) const {
    assert(i < values_.size());
    return values_[i];
  }

  T& at(std::size_t i, std::size_t j) { return values_[index(i, j)]; }
  const T& at(std::size_t i, std::size_t j) const { return values_[index(i, j)]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) { return values_[index(i, j, k)]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[index(i, j, k)];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return values_[index(i, j, k, l)];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return values_[index(i, j, k, l)];
  }

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zeroed gradient buffer on first use.
  std::span<T> grad() {
    if (!grad_) grad_.emplace(values_.size(), T{});
    return *grad_;
  }
  std::span<const T> grad() const {
    if (!grad_) return {};
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T{});
  }
  void drop_grad() { grad_.reset(); }

  // Same values under a different shape of equal element count.
  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    return std::move(out).reshaped(std::move(shape));
  }
  BasicTensor reshaped(Shape shape) && {
    if (checked_size(shape) != values_.size()) {
      throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                           shape_to_string(shape));
    }
    shape_ = std::move(shape);
    grad_.reset();
    return std::move(*this);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
    return BasicTensor<U>(shape_, std::move(out));
  }

  // Value equality with matching shapes; gradient buffers are ignored.
  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  static std::size_t checked_size(const Shape& shape) {
    for (std::size_t axis = 0; axis < shape.size(); ++axis) {
      if (shape[axis] == 0) {
        throw DimensionError("axis " + std::to_string(axis) + " of shape " +
                             shape_to_string(shape) + " is zero");
      }
    }
    return shape_size(shape);
  }

  std::size_t index(std::size_t i, std::size_t j) const {
    assert(shape_.size() == 2 && i < shape_[0] && j < shape_[1]);
    return i * shape_[1] + j;
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    assert(shape_.size() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
    return (i * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    assert(shape_.size() == 4 && i < shape_[0] && j < shape_[1] && k < shape_[2] &&
           l < shape_[3]);
    return ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  Shape shape_;
  std::vector<T> values_;
  std::optional<std::vector<T>> grad_;
};

using Tensor = BasicTensor<float>;

// Throws DimensionError naming `what` and the first axis that differs.
void require_shape(const Shape& actual, const Shape& expected, const std::string& what);
void require_rank(const Shape& actual, std::size_t rank, const std::string& what);

}  // namespace shiftlab

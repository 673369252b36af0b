#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

// Ordered, named parameter tensors. Models address entries by the index
// returned from add(); order is part of the checkpoint layout.
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, BasicTensor<T> tensor);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  BasicTensor<T>& at(std::size_t i) { return tensors_.at(i); }
  const BasicTensor<T>& at(std::size_t i) const { return tensors_.at(i); }

  // Throws ValidationError when absent.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t scalar_count() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<BasicTensor<T>> tensors_;
};

// 64-bit gradient accumulators mirroring a ParamStore; slots are allocated
// on first touch so per-example gradients stay sparse.
class GradStore {
 public:
  GradStore() = default;
  explicit GradStore(std::vector<std::size_t> slot_sizes);

  template <typename T>
  static GradStore like(const ParamStore<T>& params) {
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < params.size(); ++i) sizes.push_back(params.at(i).size());
    return GradStore(std::move(sizes));
  }

  std::size_t size() const { return sizes_.size(); }
  bool touched(std::size_t i) const { return !slots_.at(i).empty(); }
  std::span<double> slot(std::size_t i);
  std::span<const double> slot(std::size_t i) const { return slots_.at(i); }

  void add(const GradStore& other, double scale = 1.0);
  void scale(double factor);
  void clear();

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<double>> slots_;
};

}  // namespace shiftlab

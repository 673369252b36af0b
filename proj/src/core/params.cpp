#include "shiftlab/core/params.hpp"

#include <algorithm>

namespace shiftlab {

template <typename T>
std::size_t ParamStore<T>::add(std::string name, BasicTensor<T> tensor) {
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(tensor));
  return tensors_.size() - 1;
}

template <typename T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError("unknown parameter: " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

template <typename T>
bool ParamStore<T>::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template class ParamStore<float>;
template class ParamStore<double>;

GradStore::GradStore(std::vector<std::size_t> slot_sizes)
    : sizes_(std::move(slot_sizes)), slots_(sizes_.size()) {}

std::span<double> GradStore::slot(std::size_t i) {
  auto& s = slots_.at(i);
  if (s.empty()) s.assign(sizes_[i], 0.0);
  return s;
}

void GradStore::add(const GradStore& other, double scale) {
  if (other.sizes_ != sizes_) throw DimensionError("GradStore::add: layouts differ");
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!other.touched(i)) continue;
    auto dst = slot(i);
    const auto& src = other.slots_[i];
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += scale * src[j];
  }
}

void GradStore::scale(double factor) {
  for (auto& s : slots_) {
    for (auto& v : s) v *= factor;
  }
}

void GradStore::clear() {
  for (auto& s : slots_) s.clear();
}

}  // namespace shiftlab

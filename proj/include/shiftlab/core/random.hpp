#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

// SplitMix64 finalizer; derives independent stream seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// Thin wrapper over mt19937_64 with distribution code written here rather
// than taken from <random>, whose distributions differ across standard
// libraries. Every draw is therefore reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi] inclusive.
  long range(long lo, long hi);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename V>
  void shuffle(std::vector<V>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
BasicTensor<T> uniform_tensor(const Shape& shape, double lo, double hi, Rng& rng) {
  BasicTensor<T> out(shape);
  for (auto& v : out.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

}  // namespace shiftlab

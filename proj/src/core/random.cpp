#include "shiftlab/core/random.hpp"

#include "shiftlab/core/error.hpp"

namespace shiftlab {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

long Rng::range(long lo, long hi) {
  if (hi < lo) throw ValidationError("Rng::range: hi < lo");
  return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

}  // namespace shiftlab

#include "shiftlab/scene/stat_kernels.hpp"

namespace shiftlab::scene {

namespace {
std::size_t square_side(const Tensor& t, const char* what) {
  if (!(t.rank() == 2 || (t.rank() == 3 && t.dim(2) == 1))) {
    throw DimensionError(std::string(what) + ": expected an L x L map, got " + shape_to_string(t.shape()));
  }
  require_shape({t.dim(1)}, {t.dim(0)}, what);
  return t.dim(0);
}
}  // namespace

Tensor rotate180(const Tensor& kernel) {
  require_rank(kernel.shape(), 2, "rotate180 kernel");
  Tensor out(kernel.shape());
  const std::size_t n = kernel.size();
  for (std::size_t i = 0; i < n; ++i) out[n - 1 - i] = kernel[i];
  return out;
}

Tensor ShiftKernels::inverse(std::size_t predicate) const { return rotate180(forward.at(predicate)); }

ShiftKernels estimate_spatial_shift_kernels(const std::vector<Scene>& scenes, const GridGeometry& g,
                                            std::size_t predicate_count,
                                            std::vector<std::string>* warnings) {
  const std::size_t L = static_cast<std::size_t>(g.grid), side = 2 * L - 1;
  std::vector<std::vector<double>> hist(predicate_count, std::vector<double>(side * side, 0.0));
  std::vector<std::size_t> counts(predicate_count, 0);
  for (const auto& s : scenes) {
    for (const auto& r : s.relationships) {
      if (r.predicate < 0 || static_cast<std::size_t>(r.predicate) >= predicate_count) continue;
      const Box& a = s.entities.at(r.subject).bbox;
      const Box& b = s.entities.at(r.object).bbox;
      const long dr = g.row_of(b.center_y()) - g.row_of(a.center_y());
      const long dc = g.col_of(b.center_x()) - g.col_of(a.center_x());
      const std::size_t p = static_cast<std::size_t>(r.predicate);
      hist[p][static_cast<std::size_t>(static_cast<long>(L) - 1 + dr) * side +
              static_cast<std::size_t>(static_cast<long>(L) - 1 + dc)] += 1.0;
      ++counts[p];
    }
  }
  ShiftKernels out;
  for (std::size_t p = 0; p < predicate_count; ++p) {
    Tensor k({side, side});
    if (counts[p] == 0) {
      if (warnings) warnings->push_back("predicate " + std::to_string(p) + " has no instances; using a uniform kernel");
      for (auto& v : k.values()) v = static_cast<float>(1.0 / static_cast<double>(side * side));
    } else {
      for (std::size_t i = 0; i < k.size(); ++i) {
        k[i] = static_cast<float>(hist[p][i] / static_cast<double>(counts[p]));
      }
    }
    out.forward.push_back(std::move(k));
  }
  return out;
}

Tensor apply_offset_kernel(const Tensor& map, const Tensor& kernel) {
  const std::size_t L = square_side(map, "offset kernel map");
  require_shape(kernel.shape(), {2 * L - 1, 2 * L - 1}, "offset kernel");
  const long n = static_cast<long>(L), side = 2 * n - 1;
  Tensor out(map.shape());
  for (long qr = 0; qr < n; ++qr) {
    for (long qc = 0; qc < n; ++qc) {
      double acc = 0.0;
      for (long pr = 0; pr < n; ++pr) {
        for (long pc = 0; pc < n; ++pc) {
          const float v = map[static_cast<std::size_t>(pr * n + pc)];
          if (v == 0.0f) continue;
          const long dr = qr - pr, dc = qc - pc;
          acc += static_cast<double>(v) *
                 kernel[static_cast<std::size_t>((n - 1 + dr) * side + (n - 1 + dc))];
        }
      }
      out[static_cast<std::size_t>(qr * n + qc)] = static_cast<float>(acc);
    }
  }
  return out;
}

std::pair<double, double> center_of_mass(const Tensor& map) {
  const std::size_t L = square_side(map, "center_of_mass map");
  double total = 0, r = 0, c = 0;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double v = map[i * L + j];
      total += v;
      r += v * static_cast<double>(i);
      c += v * static_cast<double>(j);
    }
  }
  if (total <= 0) return {0.0, 0.0};
  return {r / total, c / total};
}

}  // namespace shiftlab::scene

#pragma once

#include <string>
#include <vector>

#include "shiftlab/scene/scene.hpp"

namespace shiftlab::scene {

// Relative-offset histograms on a (2L-1) x (2L-1) support; entry
// (L-1 + drow, L-1 + dcol) is the probability that the object's grid cell
// sits (drow, dcol) from the subject's.
struct ShiftKernels {
  std::vector<Tensor> forward;

  Tensor inverse(std::size_t predicate) const;
  std::size_t grid() const { return (forward.front().dim(0) + 1) / 2; }
};

Tensor rotate180(const Tensor& kernel);

// Predicates with no instances get a uniform kernel and a line in *warnings.
ShiftKernels estimate_spatial_shift_kernels(const std::vector<Scene>& scenes,
                                            const GridGeometry& geometry,
                                            std::size_t predicate_count,
                                            std::vector<std::string>* warnings = nullptr);

// out(q) = sum over offsets d of map(q - d) * kernel(d); cells outside the
// grid contribute nothing. A delta at (0, +3) moves mass three columns right.
Tensor apply_offset_kernel(const Tensor& map, const Tensor& kernel);

// Center of mass (row, col) of a non-negative L x L map; (0, 0) for an all-zero map.
std::pair<double, double> center_of_mass(const Tensor& map);

}  // namespace shiftlab::scene

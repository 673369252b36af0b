#pragma once

#include <memory>

#include "shiftlab/model/model.hpp"
#include "shiftlab/scene/stat_kernels.hpp"

namespace shiftlab::baselines {

using model::ModelConfig;
using model::Prediction;

// Embedding fusion followed by two role heads:
//   f = ReLU(dense(concat(parts)))          (m*C -> C)
//   h_s = ReLU(dense_s(f)), h_o = ReLU(dense_o(f))  (C -> C)
//   maps = attend(mu, h_s), attend(mu, h_o)
// Co-occurrence fuses [Emb(S), Emb(O)]; VRD fuses [Emb(S), Emb(P), Emb(O)].
template <typename T>
class FusionModel : public model::Model<T> {
 public:
  FusionModel(ModelConfig config, std::uint64_t seed);

  Prediction<T> predict(const BasicTensor<T>& mu, const scene::Query& q) const override;
  double loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q, const BasicTensor<T>& gt_subject,
                       const BasicTensor<T>& gt_object, GradStore& grads, BasicTensor<T>* grad_mu) const override;

  // Fused vector f and the two head vectors.
  struct Heads {
    BasicTensor<T> input, fused_pre, fused, subject_pre, subject, object_pre, object;
  };
  Heads heads(const scene::Query& q) const;
  bool uses_predicate() const { return this->config_.kind == model::Kind::kVrd; }

 private:
  std::size_t emb_ = 0, pred_emb_ = 0, fuse_w_ = 0;
};

// Attention modules trained without shifts (t = 0); at inference one
// refinement step moves attention with fixed statistical offset kernels:
//   object  = attend(norm(K_P (x) x0) * mu, Emb(O))
//   subject = attend(norm(rot180(K_P) (x) y0) * mu, Emb(S))
// where norm rescales the shifted map to unit peak.
template <typename T>
class SpatialShiftModel : public model::Model<T> {
 public:
  SpatialShiftModel(ModelConfig config, std::uint64_t seed);

  Prediction<T> predict(const BasicTensor<T>& mu, const scene::Query& q) const override;
  double loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q, const BasicTensor<T>& gt_subject,
                       const BasicTensor<T>& gt_object, GradStore& grads, BasicTensor<T>* grad_mu) const override;

  void set_kernels(const scene::ShiftKernels& kernels);
  scene::ShiftKernels kernels() const;
  std::size_t kernel_index(int predicate) const;

  // Shifted maps before modulation (after peak normalization).
  BasicTensor<T> shifted_object_map(const BasicTensor<T>& x0_activated, int predicate) const;
  BasicTensor<T> shifted_subject_map(const BasicTensor<T>& y0_activated, int predicate) const;

 private:
  BasicTensor<T> embedding_vector(int id) const;
  std::size_t emb_ = 0, first_kernel_ = 0;
};

// Peak normalization: divides by the maximum when positive.
template <typename T>
BasicTensor<T> unit_peak(BasicTensor<T> map);

}  // namespace shiftlab::baselines

namespace shiftlab::model {

template <typename T>
std::unique_ptr<Model<T>> make_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace shiftlab::model

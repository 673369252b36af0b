#pragma once

#include <vector>

#include "shiftlab/model/model.hpp"

namespace shiftlab::model {

enum class Direction { kForward = 0, kInverse = 1 };

// Maps of every iteration. subject/object hold iterations 0..t;
// subject_shift[i] / object_shift[i] are the shifted maps that modulated
// iteration i + 1 (from Sh^-1 of the object and Sh of the subject).
template <typename T>
struct RolloutTrace {
  std::vector<AttentionMap<T>> subject, object;
  std::vector<AttentionMap<T>> subject_shift, object_shift;
};

template <typename T>
class SsasModel : public Model<T> {
 public:
  SsasModel(ModelConfig config, std::uint64_t seed);

  Prediction<T> predict(const BasicTensor<T>& mu, const scene::Query& q) const override;
  double loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q, const BasicTensor<T>& gt_subject,
                       const BasicTensor<T>& gt_object, GradStore& grads, BasicTensor<T>* grad_mu) const override;

  // t iterations; t < 0 uses the configured count.
  RolloutTrace<T> infer_rollout(const BasicTensor<T>& mu, const scene::Query& q, int t = -1) const;

  KernelStack<T> stack(int predicate, Direction d) const;
  std::size_t stage_index(int predicate, Direction d, std::size_t stage) const;
  std::size_t embedding_index() const { return embedding_index_; }
  BasicTensor<T> embedding_vector(int id) const;

 private:
  struct Cache;
  RolloutTrace<T> run(const BasicTensor<T>& mu, const scene::Query& q, int t, Cache* cache) const;

  std::size_t embedding_index_ = 0;
  std::size_t first_stage_ = 0;
};

}  // namespace shiftlab::model

#pragma once

#include <cstdint>
#include <limits>
#include <memory>

#include "shiftlab/core/params.hpp"
#include "shiftlab/core/random.hpp"
#include "shiftlab/encoder/encoder.hpp"
#include "shiftlab/model/attention.hpp"
#include "shiftlab/model/config.hpp"
#include "shiftlab/scene/query.hpp"

namespace shiftlab::model {

// Final per-role logits (L x L) fed to the loss and to scoring.
template <typename T>
struct Prediction {
  BasicTensor<T> subject;
  BasicTensor<T> object;
};

// Shared surface of SSAS and the baselines: an encoder, a head mapping
// (mu, query) to two logit maps, and the summed per-role BCE loss.
template <typename T>
class Model {
 public:
  virtual ~Model() = default;

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  virtual Prediction<T> predict(const BasicTensor<T>& mu, const scene::Query& q) const = 0;

  // bce(subject) + bce(object). Gradients accumulate into grads; dL/dmu is
  // written to *grad_mu when non-null.
  virtual double loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q,
                               const BasicTensor<T>& gt_subject, const BasicTensor<T>& gt_object,
                               GradStore& grads, BasicTensor<T>* grad_mu) const = 0;

  BasicTensor<T> encode(const scene::Scene& s, const scene::Vocabulary& vocab,
                        encoder::CnnCache<T>* cache = nullptr) const;
  void encode_backward(const encoder::CnnCache<T>& cache, const BasicTensor<T>& grad_mu,
                       GradStore& grads) const;
  bool trains_encoder() const { return config_.encoder.mode == encoder::Mode::kTrainable; }

  // Row of the entity table: the category id, or the unknown row for kMasked.
  std::size_t embedding_row(int id) const;

  // Replaces parameters after checking names and shapes match the current set.
  void load_params(const ParamStore<T>& params);

 protected:
  Model(ModelConfig config, std::uint64_t seed);

  // Adds the offsets; call last in derived constructors.
  void add_output_offset();
  BasicTensor<T> with_offset(BasicTensor<T> logits, std::size_t role) const;
  // Loss and logit gradient for one role, with the offset gradient accumulated.
  double role_loss(const BasicTensor<T>& logits, const BasicTensor<T>& target, std::size_t role,
                   GradStore& grads, BasicTensor<T>& grad_logits) const;

  ModelConfig config_;
  ParamStore<T> params_;
  Rng init_rng_;
  encoder::CnnLayout encoder_layout_{};
  std::size_t offset_index_ = std::numeric_limits<std::size_t>::max();
};

// Bernoulli(drop_rate) per slot, subject first; always consumes two draws.
scene::Query mask_query(const scene::Query& q, double drop_rate, Rng& rng);

std::uint64_t init_seed(std::uint64_t seed);

}  // namespace shiftlab::model

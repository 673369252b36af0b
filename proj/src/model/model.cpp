#include "shiftlab/model/model.hpp"

#include "shiftlab/core/ops.hpp"
#include "shiftlab/scene/generate.hpp"

namespace shiftlab::model {

std::uint64_t init_seed(std::uint64_t seed) { return mix_seed(seed, 0x1417); }

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), init_rng_(init_seed(seed)) {
  config_.validate();
  if (trains_encoder()) encoder_layout_ = encoder::add_cnn_params(params_, config_.encoder, init_rng_);
}

template <typename T>
void Model<T>::add_output_offset() {
  if (config_.output_offset) offset_index_ = params_.add("out.offset", BasicTensor<T>({2}));
}

template <typename T>
BasicTensor<T> Model<T>::with_offset(BasicTensor<T> logits, std::size_t role) const {
  if (offset_index_ == std::numeric_limits<std::size_t>::max()) return logits;
  const double b = params_.at(offset_index_)[role];
  for (auto& v : logits.values()) v = static_cast<T>(static_cast<double>(v) + b);
  return logits;
}

template <typename T>
double Model<T>::role_loss(const BasicTensor<T>& logits, const BasicTensor<T>& target, std::size_t role,
                           GradStore& grads, BasicTensor<T>& grad_logits) const {
  const BasicTensor<T> z = with_offset(logits, role);
  const double loss = ops::bce_with_logits(z, target);
  grad_logits = ops::bce_with_logits_backward(z, target);
  if (offset_index_ != std::numeric_limits<std::size_t>::max()) {
    double s = 0.0;
    for (T g : grad_logits.values()) s += static_cast<double>(g);
    grads.slot(offset_index_)[role] += s;
  }
  return loss;
}

template <typename T>
BasicTensor<T> Model<T>::encode(const scene::Scene& s, const scene::Vocabulary& vocab,
                                encoder::CnnCache<T>* cache) const {
  if (!trains_encoder()) {
    return encoder::oracle_encode(s, scene::GridGeometry::make(config_.encoder.image_size, config_.encoder.grid),
                                  config_.categories)
        .template cast<T>();
  }
  if (s.width != config_.encoder.image_size || s.height != config_.encoder.image_size) {
    throw ConfigError("scene " + s.id + " size does not match the encoder's image size");
  }
  return encoder::cnn_encode(scene::rasterize(s, vocab).template cast<T>(), params_, encoder_layout_,
                             config_.grid(), cache);
}

template <typename T>
void Model<T>::encode_backward(const encoder::CnnCache<T>& cache, const BasicTensor<T>& grad_mu,
                               GradStore& grads) const {
  if (trains_encoder()) encoder::cnn_encode_backward(cache, grad_mu, params_, encoder_layout_, grads);
}

template <typename T>
std::size_t Model<T>::embedding_row(int id) const {
  if (id == scene::kMasked) return config_.categories;
  if (id < 0 || static_cast<std::size_t>(id) >= config_.categories) {
    throw ValidationError("entity id " + std::to_string(id) + " outside the vocabulary");
  }
  return static_cast<std::size_t>(id);
}

template <typename T>
void Model<T>::load_params(const ParamStore<T>& params) {
  if (params.size() != params_.size()) {
    throw ValidationError("parameter count " + std::to_string(params.size()) + " does not match model (" +
                          std::to_string(params_.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.name(i) != params_.name(i)) {
      throw ValidationError("parameter " + std::to_string(i) + " is '" + params.name(i) + "', expected '" +
                            params_.name(i) + "'");
    }
    require_shape(params.at(i).shape(), params_.at(i).shape(), "parameter " + params.name(i));
  }
  params_ = params;
}

scene::Query mask_query(const scene::Query& q, double drop_rate, Rng& rng) {
  scene::Query out = q;
  const bool drop_s = rng.bernoulli(drop_rate);
  const bool drop_o = rng.bernoulli(drop_rate);
  if (drop_s) out.subject = scene::kMasked;
  if (drop_o) out.object = scene::kMasked;
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace shiftlab::model

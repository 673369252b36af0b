#include "shiftlab/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "shiftlab/core/ops.hpp"
#include "shiftlab/model/ssas.hpp"

namespace shiftlab::baselines {

namespace {

template <typename T>
BasicTensor<T> row_of(const BasicTensor<T>& table, std::size_t row) {
  const std::size_t C = table.dim(1);
  return BasicTensor<T>({C}, std::vector<T>(table.data() + row * C, table.data() + (row + 1) * C));
}

template <typename T>
BasicTensor<T> dense_init(std::size_t din, std::size_t dout, Rng& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(din));
  return uniform_tensor<T>({din, dout}, -bound, bound, rng);
}

}  // namespace

template <typename T>
FusionModel<T>::FusionModel(ModelConfig config, std::uint64_t seed) : model::Model<T>(std::move(config), seed) {
  const auto& cfg = this->config_;
  if (cfg.kind != model::Kind::kCooccurrence && cfg.kind != model::Kind::kVrd) {
    throw ConfigError("fusion model needs kind cooccur or vrd");
  }
  const std::size_t C = cfg.channels();
  const double emb_bound = std::sqrt(3.0);
  emb_ = this->params_.add("emb", uniform_tensor<T>({cfg.categories + 1, C}, -emb_bound, emb_bound, this->init_rng_));
  if (uses_predicate()) {
    pred_emb_ = this->params_.add("pred_emb", uniform_tensor<T>({cfg.predicates, C}, -emb_bound, emb_bound, this->init_rng_));
  }
  const std::size_t parts = uses_predicate() ? 3 : 2;
  fuse_w_ = this->params_.add("fuse.w", dense_init<T>(parts * C, C, this->init_rng_));
  // Small positive biases keep the ReLU layers alive early in training.
  const BasicTensor<T> bias = BasicTensor<T>({C}, std::vector<T>(C, T(0.1)));
  this->params_.add("fuse.b", bias);
  this->params_.add("head_s.w", dense_init<T>(C, C, this->init_rng_));
  this->params_.add("head_s.b", bias);
  this->params_.add("head_o.w", dense_init<T>(C, C, this->init_rng_));
  this->params_.add("head_o.b", bias);
  this->add_output_offset();
}

template <typename T>
typename FusionModel<T>::Heads FusionModel<T>::heads(const scene::Query& q) const {
  const auto& p = this->params_;
  Heads h;
  const BasicTensor<T> es = row_of(p.at(emb_), this->embedding_row(q.subject));
  const BasicTensor<T> eo = row_of(p.at(emb_), this->embedding_row(q.object));
  if (uses_predicate()) {
    if (q.predicate < 0 || static_cast<std::size_t>(q.predicate) >= this->config_.predicates) {
      throw ValidationError("predicate id " + std::to_string(q.predicate) + " outside the vocabulary");
    }
    const BasicTensor<T> ep = row_of(p.at(pred_emb_), static_cast<std::size_t>(q.predicate));
    h.input = ops::concat<T>({&es, &ep, &eo});
  } else {
    h.input = ops::concat<T>({&es, &eo});
  }
  const std::size_t w = fuse_w_;
  h.fused_pre = ops::dense(h.input, p.at(w), p.at(w + 1));
  h.fused = ops::relu(h.fused_pre);
  h.subject_pre = ops::dense(h.fused, p.at(w + 2), p.at(w + 3));
  h.subject = ops::relu(h.subject_pre);
  h.object_pre = ops::dense(h.fused, p.at(w + 4), p.at(w + 5));
  h.object = ops::relu(h.object_pre);
  return h;
}

template <typename T>
Prediction<T> FusionModel<T>::predict(const BasicTensor<T>& mu, const scene::Query& q) const {
  const Heads h = heads(q);
  return {this->with_offset(model::attend(mu, h.subject).logits, 0),
          this->with_offset(model::attend(mu, h.object).logits, 1)};
}

template <typename T>
double FusionModel<T>::loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q, const BasicTensor<T>& gt_s,
                                     const BasicTensor<T>& gt_o, GradStore& grads, BasicTensor<T>* grad_mu) const {
  const Heads h = heads(q);
  const auto& p = this->params_;
  const std::size_t C = this->config_.channels(), w = fuse_w_;
  BasicTensor<T> gx, gy;
  double loss = this->role_loss(model::attend(mu, h.subject).logits, gt_s, 0, grads, gx);
  loss += this->role_loss(model::attend(mu, h.object).logits, gt_o, 1, grads, gy);

  std::vector<double> ghs(C, 0.0), gho(C, 0.0);
  BasicTensor<T> gmu_s, gmu_o;
  model::attend_backward(mu, h.subject, gx, grad_mu ? &gmu_s : nullptr, std::span<double>(ghs));
  model::attend_backward(mu, h.object, gy, grad_mu ? &gmu_o : nullptr, std::span<double>(gho));
  if (grad_mu) {
    std::vector<double> acc(mu.size());
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = static_cast<double>(gmu_s[i]) + static_cast<double>(gmu_o[i]);
    *grad_mu = ops::from_accumulator<T>(mu.shape(), acc);
  }
  BasicTensor<T> gf_s, gf_o;
  ops::dense_backward(h.fused, p.at(w + 2), ops::relu_backward(h.subject_pre, ops::from_accumulator<T>({C}, ghs)),
                      &gf_s, grads.slot(w + 2), grads.slot(w + 3));
  ops::dense_backward(h.fused, p.at(w + 4), ops::relu_backward(h.object_pre, ops::from_accumulator<T>({C}, gho)),
                      &gf_o, grads.slot(w + 4), grads.slot(w + 5));
  std::vector<double> gf(C);
  for (std::size_t i = 0; i < C; ++i) gf[i] = static_cast<double>(gf_s[i]) + static_cast<double>(gf_o[i]);
  BasicTensor<T> gin;
  ops::dense_backward(h.input, p.at(w), ops::relu_backward(h.fused_pre, ops::from_accumulator<T>({C}, gf)), &gin,
                      grads.slot(w), grads.slot(w + 1));

  std::span<double> emb = grads.slot(emb_);
  const std::size_t rs = this->embedding_row(q.subject), ro = this->embedding_row(q.object);
  const std::size_t o_off = uses_predicate() ? 2 * C : C;
  for (std::size_t c = 0; c < C; ++c) {
    emb[rs * C + c] += gin[c];
    emb[ro * C + c] += gin[o_off + c];
  }
  if (uses_predicate()) {
    std::span<double> pe = grads.slot(pred_emb_);
    const std::size_t rp = static_cast<std::size_t>(q.predicate);
    for (std::size_t c = 0; c < C; ++c) pe[rp * C + c] += gin[C + c];
  }
  return loss;
}

template <typename T>
BasicTensor<T> unit_peak(BasicTensor<T> map) {
  T peak = 0;
  for (T v : map.values()) peak = std::max(peak, v);
  if (peak > 0) {
    for (auto& v : map.values()) v = static_cast<T>(static_cast<double>(v) / static_cast<double>(peak));
  }
  return map;
}

template <typename T>
SpatialShiftModel<T>::SpatialShiftModel(ModelConfig config, std::uint64_t seed)
    : model::Model<T>(std::move(config), seed) {
  const auto& cfg = this->config_;
  if (cfg.kind != model::Kind::kSpatialShift) throw ConfigError("spatial shift model needs kind spatialshift");
  const std::size_t C = cfg.channels(), L = cfg.grid(), side = 2 * L - 1;
  const double emb_bound = std::sqrt(3.0);
  emb_ = this->params_.add("emb", uniform_tensor<T>({cfg.categories + 1, C}, -emb_bound, emb_bound, this->init_rng_));
  first_kernel_ = this->params_.size();
  for (std::size_t p = 0; p < cfg.predicates; ++p) {
    this->params_.add("stat.p" + std::to_string(p),
                      BasicTensor<T>({side, side}, static_cast<T>(1.0 / static_cast<double>(side * side))));
  }
  this->add_output_offset();
}

template <typename T>
std::size_t SpatialShiftModel<T>::kernel_index(int predicate) const {
  if (predicate < 0 || static_cast<std::size_t>(predicate) >= this->config_.predicates) {
    throw ValidationError("predicate id " + std::to_string(predicate) + " outside the vocabulary");
  }
  return first_kernel_ + static_cast<std::size_t>(predicate);
}

template <typename T>
void SpatialShiftModel<T>::set_kernels(const scene::ShiftKernels& kernels) {
  if (kernels.forward.size() != this->config_.predicates) {
    throw ValidationError("statistical kernels cover " + std::to_string(kernels.forward.size()) +
                          " predicates, model has " + std::to_string(this->config_.predicates));
  }
  for (std::size_t p = 0; p < kernels.forward.size(); ++p) {
    auto& dst = this->params_.at(first_kernel_ + p);
    require_shape(kernels.forward[p].shape(), dst.shape(), "statistical kernel");
    dst = kernels.forward[p].template cast<T>();
  }
}

template <typename T>
scene::ShiftKernels SpatialShiftModel<T>::kernels() const {
  scene::ShiftKernels out;
  for (std::size_t p = 0; p < this->config_.predicates; ++p) {
    out.forward.push_back(this->params_.at(first_kernel_ + p).template cast<float>());
  }
  return out;
}

template <typename T>
BasicTensor<T> SpatialShiftModel<T>::embedding_vector(int id) const {
  return row_of(this->params_.at(emb_), this->embedding_row(id));
}

template <typename T>
BasicTensor<T> SpatialShiftModel<T>::shifted_object_map(const BasicTensor<T>& x0, int predicate) const {
  const Tensor k = this->params_.at(kernel_index(predicate)).template cast<float>();
  return unit_peak(scene::apply_offset_kernel(x0.template cast<float>(), k).template cast<T>());
}

template <typename T>
BasicTensor<T> SpatialShiftModel<T>::shifted_subject_map(const BasicTensor<T>& y0, int predicate) const {
  const Tensor k = scene::rotate180(this->params_.at(kernel_index(predicate)).template cast<float>());
  return unit_peak(scene::apply_offset_kernel(y0.template cast<float>(), k).template cast<T>());
}

template <typename T>
Prediction<T> SpatialShiftModel<T>::predict(const BasicTensor<T>& mu, const scene::Query& q) const {
  const BasicTensor<T> es = embedding_vector(q.subject), eo = embedding_vector(q.object);
  const model::AttentionMap<T> x0 = model::attend(mu, es), y0 = model::attend(mu, eo);
  const BasicTensor<T> so = shifted_object_map(x0.activated, q.predicate);
  const BasicTensor<T> ss = shifted_subject_map(y0.activated, q.predicate);
  return {this->with_offset(model::attend(ops::broadcast_mul(ss, mu), es).logits, 0),
          this->with_offset(model::attend(ops::broadcast_mul(so, mu), eo).logits, 1)};
}

template <typename T>
double SpatialShiftModel<T>::loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q,
                                           const BasicTensor<T>& gt_s, const BasicTensor<T>& gt_o, GradStore& grads,
                                           BasicTensor<T>* grad_mu) const {
  const std::size_t C = this->config_.channels();
  const BasicTensor<T> es = embedding_vector(q.subject), eo = embedding_vector(q.object);
  BasicTensor<T> gx, gy;
  double loss = this->role_loss(model::attend(mu, es).logits, gt_s, 0, grads, gx);
  loss += this->role_loss(model::attend(mu, eo).logits, gt_o, 1, grads, gy);
  std::span<double> emb = grads.slot(emb_);
  BasicTensor<T> ga, gb;
  model::attend_backward(mu, es, gx, grad_mu ? &ga : nullptr, emb.subspan(this->embedding_row(q.subject) * C, C));
  model::attend_backward(mu, eo, gy, grad_mu ? &gb : nullptr, emb.subspan(this->embedding_row(q.object) * C, C));
  if (grad_mu) {
    std::vector<double> acc(mu.size());
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = static_cast<double>(ga[i]) + static_cast<double>(gb[i]);
    *grad_mu = ops::from_accumulator<T>(mu.shape(), acc);
  }
  return loss;
}

template class FusionModel<float>;
template class FusionModel<double>;
template class SpatialShiftModel<float>;
template class SpatialShiftModel<double>;
template BasicTensor<float> unit_peak<float>(BasicTensor<float>);
template BasicTensor<double> unit_peak<double>(BasicTensor<double>);

}  // namespace shiftlab::baselines

namespace shiftlab::model {

template <typename T>
std::unique_ptr<Model<T>> make_model(const ModelConfig& config, std::uint64_t seed) {
  switch (config.kind) {
    case Kind::kSsas: return std::make_unique<SsasModel<T>>(config, seed);
    case Kind::kCooccurrence:
    case Kind::kVrd: return std::make_unique<baselines::FusionModel<T>>(config, seed);
    case Kind::kSpatialShift: return std::make_unique<baselines::SpatialShiftModel<T>>(config, seed);
  }
  throw ConfigError("unknown model kind");
}

template std::unique_ptr<Model<float>> make_model<float>(const ModelConfig&, std::uint64_t);
template std::unique_ptr<Model<double>> make_model<double>(const ModelConfig&, std::uint64_t);

}  // namespace shiftlab::model

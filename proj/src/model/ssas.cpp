#include "shiftlab/model/ssas.hpp"

#include <cmath>

#include "shiftlab/core/ops.hpp"

namespace shiftlab::model {

template <typename T>
struct SsasModel<T>::Cache {
  std::vector<ShiftTrace<T>> fwd, inv;      // per refinement iteration
  std::vector<BasicTensor<T>> mod_s, mod_o;  // modulated features
};

template <typename T>
SsasModel<T>::SsasModel(ModelConfig config, std::uint64_t seed) : Model<T>(std::move(config), seed) {
  auto& cfg = this->config_;
  const std::size_t C = cfg.channels(), rows = cfg.categories + 1;
  const double emb_bound = 0.1 * std::sqrt(3.0);
  embedding_index_ = this->params_.add("emb", uniform_tensor<T>({rows, C}, -emb_bound, emb_bound, this->init_rng_));
  const std::size_t n = static_cast<std::size_t>(cfg.shift_layers);
  const std::size_t k = static_cast<std::size_t>(cfg.kernel_size);
  const std::size_t hidden = static_cast<std::size_t>(cfg.shift_channels);
  first_stage_ = this->params_.size();
  for (std::size_t p = 0; p < cfg.predicates; ++p) {
    for (const char* dir : {"fwd", "inv"}) {
      for (std::size_t l = 0; l < n; ++l) {
        const std::size_t cin = l == 0 ? 1 : hidden, cout = l + 1 == n ? 1 : hidden;
        const double bound = std::sqrt(3.0 / static_cast<double>(k * k * cin));
        this->params_.add("shift.p" + std::to_string(p) + "." + dir + "." + std::to_string(l),
                          uniform_tensor<T>({k, k, cin, cout}, -bound, bound, this->init_rng_));
      }
    }
  }
  for (std::size_t p = 0; p < cfg.predicates; ++p) {
    validate_stack(stack(static_cast<int>(p), Direction::kForward));
    validate_stack(stack(static_cast<int>(p), Direction::kInverse));
  }
  this->add_output_offset();
}

template <typename T>
std::size_t SsasModel<T>::stage_index(int predicate, Direction d, std::size_t stage) const {
  if (predicate < 0 || static_cast<std::size_t>(predicate) >= this->config_.predicates) {
    throw ValidationError("predicate id " + std::to_string(predicate) + " outside the vocabulary");
  }
  const std::size_t n = static_cast<std::size_t>(this->config_.shift_layers);
  return first_stage_ + (static_cast<std::size_t>(predicate) * 2 + static_cast<std::size_t>(d)) * n + stage;
}

template <typename T>
KernelStack<T> SsasModel<T>::stack(int predicate, Direction d) const {
  KernelStack<T> out;
  for (std::size_t l = 0; l < static_cast<std::size_t>(this->config_.shift_layers); ++l) {
    out.push_back(&this->params_.at(stage_index(predicate, d, l)));
  }
  return out;
}

template <typename T>
BasicTensor<T> SsasModel<T>::embedding_vector(int id) const {
  const std::size_t row = this->embedding_row(id), C = this->config_.channels();
  const BasicTensor<T>& table = this->params_.at(embedding_index_);
  return BasicTensor<T>({C}, std::vector<T>(table.data() + row * C, table.data() + (row + 1) * C));
}

template <typename T>
RolloutTrace<T> SsasModel<T>::run(const BasicTensor<T>& mu, const scene::Query& q, int t, Cache* cache) const {
  require_shape(mu.shape(), {this->config_.grid(), this->config_.grid(), this->config_.channels()}, "feature map");
  const BasicTensor<T> es = embedding_vector(q.subject), eo = embedding_vector(q.object);
  RolloutTrace<T> tr;
  tr.subject.push_back(attend(mu, es));
  tr.object.push_back(attend(mu, eo));
  if (t == 0) return tr;
  const KernelStack<T> fwd = stack(q.predicate, Direction::kForward);
  const KernelStack<T> inv = stack(q.predicate, Direction::kInverse);
  for (int it = 1; it <= t; ++it) {
    ShiftTrace<T> tf, ti;
    AttentionMap<T> ys = shift(tr.subject.back().activated, fwd, cache ? &tf : nullptr);
    AttentionMap<T> xs = shift(tr.object.back().activated, inv, cache ? &ti : nullptr);
    BasicTensor<T> ms = ops::broadcast_mul(xs.activated, mu);
    BasicTensor<T> mo = ops::broadcast_mul(ys.activated, mu);
    tr.subject.push_back(attend(ms, es));
    tr.object.push_back(attend(mo, eo));
    tr.subject_shift.push_back(std::move(xs));
    tr.object_shift.push_back(std::move(ys));
    if (cache) {
      cache->fwd.push_back(std::move(tf));
      cache->inv.push_back(std::move(ti));
      cache->mod_s.push_back(std::move(ms));
      cache->mod_o.push_back(std::move(mo));
    }
  }
  return tr;
}

template <typename T>
RolloutTrace<T> SsasModel<T>::infer_rollout(const BasicTensor<T>& mu, const scene::Query& q, int t) const {
  return run(mu, q, t < 0 ? this->config_.iterations : t, nullptr);
}

template <typename T>
Prediction<T> SsasModel<T>::predict(const BasicTensor<T>& mu, const scene::Query& q) const {
  RolloutTrace<T> tr = infer_rollout(mu, q);
  return {this->with_offset(std::move(tr.subject.back().logits), 0),
          this->with_offset(std::move(tr.object.back().logits), 1)};
}

template <typename T>
double SsasModel<T>::loss_and_grad(const BasicTensor<T>& mu, const scene::Query& q, const BasicTensor<T>& gt_s,
                                   const BasicTensor<T>& gt_o, GradStore& grads, BasicTensor<T>* grad_mu) const {
  const int t = this->config_.iterations;
  Cache cache;
  const RolloutTrace<T> tr = run(mu, q, t, &cache);
  const std::size_t T_ = static_cast<std::size_t>(t);
  const std::size_t C = this->config_.channels();
  const std::size_t rs = this->embedding_row(q.subject), ro = this->embedding_row(q.object);
  const BasicTensor<T> es = embedding_vector(q.subject), eo = embedding_vector(q.object);
  std::span<double> emb = grads.slot(embedding_index_);
  std::span<double> g_es = emb.subspan(rs * C, C), g_eo = emb.subspan(ro * C, C);
  std::vector<double> gmu;
  if (grad_mu) gmu.assign(mu.size(), 0.0);
  auto add_mu = [&](const BasicTensor<T>& g) {
    for (std::size_t i = 0; i < gmu.size(); ++i) gmu[i] += static_cast<double>(g[i]);
  };

  BasicTensor<T> gx, gy;
  double loss = this->role_loss(tr.subject[T_].logits, gt_s, 0, grads, gx);
  loss += this->role_loss(tr.object[T_].logits, gt_o, 1, grads, gy);

  const KernelStack<T> fwd = t > 0 ? stack(q.predicate, Direction::kForward) : KernelStack<T>{};
  const KernelStack<T> inv = t > 0 ? stack(q.predicate, Direction::kInverse) : KernelStack<T>{};
  const std::size_t n = static_cast<std::size_t>(this->config_.shift_layers);
  std::vector<std::span<double>> g_fwd, g_inv;
  if (t > 0) {
    for (std::size_t l = 0; l < n; ++l) {
      g_fwd.push_back(grads.slot(stage_index(q.predicate, Direction::kForward, l)));
      g_inv.push_back(grads.slot(stage_index(q.predicate, Direction::kInverse, l)));
    }
  }

  for (std::size_t it = T_; it >= 1; --it) {
    const std::size_t c = it - 1;
    BasicTensor<T> gms, gmo, g_xs, g_ys, part;
    attend_backward(cache.mod_s[c], es, gx, &gms, g_es);
    attend_backward(cache.mod_o[c], eo, gy, &gmo, g_eo);
    ops::broadcast_mul_backward(tr.subject_shift[c].activated, mu, gms, &g_xs, grad_mu ? &part : nullptr);
    if (grad_mu) add_mu(part);
    ops::broadcast_mul_backward(tr.object_shift[c].activated, mu, gmo, &g_ys, grad_mu ? &part : nullptr);
    if (grad_mu) add_mu(part);
    const BasicTensor<T> gy_prev =
        shift_backward(cache.inv[c], inv, ops::relu_backward(tr.subject_shift[c].logits, g_xs), g_inv);
    const BasicTensor<T> gx_prev =
        shift_backward(cache.fwd[c], fwd, ops::relu_backward(tr.object_shift[c].logits, g_ys), g_fwd);
    gx = ops::relu_backward(tr.subject[c].logits, gx_prev);
    gy = ops::relu_backward(tr.object[c].logits, gy_prev);
    if (this->config_.intermediate_supervision) {
      BasicTensor<T> ex, ey;
      loss += this->role_loss(tr.subject[c].logits, gt_s, 0, grads, ex);
      loss += this->role_loss(tr.object[c].logits, gt_o, 1, grads, ey);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] = static_cast<T>(static_cast<double>(gx[i]) + ex[i]);
        gy[i] = static_cast<T>(static_cast<double>(gy[i]) + ey[i]);
      }
    }
  }
  BasicTensor<T> part;
  attend_backward(mu, es, gx, grad_mu ? &part : nullptr, g_es);
  if (grad_mu) add_mu(part);
  attend_backward(mu, eo, gy, grad_mu ? &part : nullptr, g_eo);
  if (grad_mu) {
    add_mu(part);
    *grad_mu = ops::from_accumulator<T>(mu.shape(), gmu);
  }
  return loss;
}

template class SsasModel<float>;
template class SsasModel<double>;

}  // namespace shiftlab::model

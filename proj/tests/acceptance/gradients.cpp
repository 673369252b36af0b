#include "gradients.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "shiftlab/baselines/baselines.hpp"
#include "shiftlab/core/ops.hpp"
#include "shiftlab/encoder/encoder.hpp"
#include "shiftlab/model/ssas.hpp"
#include "shiftlab/core/params.hpp"
#include "shiftlab/core/random.hpp"

namespace shiftlab::acceptance {

namespace {

using D = BasicTensor<double>;
using Fn = std::function<double(const std::vector<D>&)>;
constexpr double kH = 1e-6;

double rel(double a, double n) { return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)); }

// Central differences on the listed (input, index) entries; all entries when
// `entries` is empty.
double fd_max_error(const Fn& f, std::vector<D> x, const std::vector<D>& analytic, double h,
                    std::vector<std::pair<std::size_t, std::size_t>> entries = {}) {
  if (entries.empty())
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x[i].size(); ++j) entries.emplace_back(i, j);
  double worst = 0;
  for (const auto& [i, j] : entries) {
    const double v = x[i][j];
    x[i][j] = v + h;
    const double up = f(x);
    x[i][j] = v - h;
    const double down = f(x);
    x[i][j] = v;
    worst = std::max(worst, rel(analytic[i][j], (up - down) / (2 * h)));
  }
  return worst;
}

std::vector<D> tensors_of(const ParamStore<double>& p) {
  std::vector<D> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p.at(i));
  return out;
}

ParamStore<double> store_of(const ParamStore<double>& like, const std::vector<D>& t) {
  ParamStore<double> out;
  for (std::size_t i = 0; i < like.size(); ++i) out.add(like.name(i), t[i]);
  return out;
}

std::vector<D> grads_of(const ParamStore<double>& p, const GradStore& g) {
  std::vector<D> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    D t(p.at(i).shape());
    if (g.touched(i)) {
      const auto s = g.slot(i);
      for (std::size_t j = 0; j < t.size(); ++j) t[j] = s[j];
    }
    out.push_back(std::move(t));
  }
  return out;
}

double weighted(const D& out, const D& w) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

D spans_to(const Shape& s, const std::vector<double>& v) { return D(s, v); }

GradCase conv_case(const Shape& in_s, const Shape& k_s, std::uint64_t seed) {
  Rng rng(seed);
  const D in = uniform_tensor<double>(in_s, -1, 1, rng), k = uniform_tensor<double>(k_s, -1, 1, rng);
  const D w = uniform_tensor<double>({in_s[0], in_s[1], k_s[3]}, -1, 1, rng);
  const auto g = ops::conv2d_backward(in, k, w);
  const double r = fd_max_error([&](const std::vector<D>& x) { return weighted(ops::conv2d(x[0], x[1]), w); },
                                    {in, k}, {g.input, g.kernel}, kH);
  return {"conv2d " + shape_to_string(in_s) + " * " + shape_to_string(k_s), r, false};
}

GradCase dense_case(std::size_t n_in, std::size_t n_out, std::uint64_t seed) {
  Rng rng(seed);
  const D x = uniform_tensor<double>({n_in}, -1, 1, rng), W = uniform_tensor<double>({n_in, n_out}, -1, 1, rng);
  const D b = uniform_tensor<double>({n_out}, -1, 1, rng), w = uniform_tensor<double>({n_out}, -1, 1, rng);
  const auto g = ops::dense_backward(x, W, w);
  const double r = fd_max_error(
      [&](const std::vector<D>& t) { return weighted(ops::dense(t[0], t[1], t[2]), w); }, {x, W, b},
      {g.input, g.weights, g.bias}, kH);
  return {"dense " + std::to_string(n_in) + "->" + std::to_string(n_out), r, false};
}

GradCase relu_case(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  const D x = uniform_tensor<double>(s, -1, 1, rng), k = uniform_tensor<double>({3, 3, s[2], 2}, -1, 1, rng);
  const D w = uniform_tensor<double>({s[0], s[1], 2}, -1, 1, rng);
  const auto g = ops::conv2d_backward(x, k, ops::relu_backward(ops::conv2d(x, k), w));
  const double r = fd_max_error(
      [&](const std::vector<D>& t) { return weighted(ops::relu(ops::conv2d(t[0], t[1])), w); }, {x, k},
      {g.input, g.kernel}, kH);
  return {"relu(conv2d) " + shape_to_string(s), r, false};
}

GradCase broadcast_case(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  const D m = uniform_tensor<double>({s[0], s[1]}, -1, 1, rng), f = uniform_tensor<double>(s, -1, 1, rng);
  const D w = uniform_tensor<double>(s, -1, 1, rng);
  D gm, gf;
  ops::broadcast_mul_backward(m, f, w, &gm, &gf);
  const double r = fd_max_error(
      [&](const std::vector<D>& t) { return weighted(ops::broadcast_mul(t[0], t[1]), w); }, {m, f}, {gm, gf}, kH);
  return {"broadcast_mul " + shape_to_string(s), r, false};
}

GradCase bce_case(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  const D z = uniform_tensor<double>(s, -4, 4, rng);
  D y(s);
  for (auto& v : y.values()) v = rng.bernoulli(0.4);
  const D g = ops::bce_with_logits_backward(z, y);
  const double r = fd_max_error([&](const std::vector<D>& t) { return ops::bce_with_logits(t[0], y); }, {z}, {g},
                                    kH);
  return {"bce_with_logits " + shape_to_string(s), r, false};
}

GradCase attend_case(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  const D mu = uniform_tensor<double>(s, 0, 1, rng), e = uniform_tensor<double>({s[2]}, -1, 1, rng);
  const D w = uniform_tensor<double>({s[0], s[1]}, -1, 1, rng);
  D gmu;
  std::vector<double> ge(s[2], 0.0);
  model::attend_backward(mu, e, w, &gmu, std::span<double>(ge));
  const double r = fd_max_error(
      [&](const std::vector<D>& t) { return weighted(model::attend(t[0], t[1]).logits, w); }, {mu, e},
      {gmu, spans_to({s[2]}, ge)}, kH);
  return {"attend " + shape_to_string(s), r, false};
}

GradCase shift_case(std::size_t L, std::size_t n, std::size_t k, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<D> ks;
  for (std::size_t l = 0; l < n; ++l) {
    ks.push_back(uniform_tensor<double>({k, k, l == 0 ? 1 : c, l + 1 == n ? 1 : c}, -0.6, 0.8, rng));
  }
  auto view = [](const std::vector<D>& v) {
    model::KernelStack<double> s;
    for (const auto& t : v) s.push_back(&t);
    return s;
  };
  const D in = uniform_tensor<double>({L, L}, 0, 1, rng), w = uniform_tensor<double>({L, L}, -1, 1, rng);
  model::ShiftTrace<double> tr;
  model::shift(in, view(ks), &tr);
  std::vector<std::vector<double>> gk;
  std::vector<std::span<double>> spans;
  for (const auto& t : ks) gk.emplace_back(t.size(), 0.0);
  for (auto& g : gk) spans.emplace_back(g);
  const D gin = model::shift_backward(tr, view(ks), w, spans);
  std::vector<D> inputs{in}, analytic{gin};
  for (std::size_t l = 0; l < n; ++l) {
    inputs.push_back(ks[l]);
    analytic.push_back(D(ks[l].shape(), gk[l]));
  }
  const double r = fd_max_error(
      [&](const std::vector<D>& t) {
        std::vector<D> kk(t.begin() + 1, t.end());
        return weighted(model::shift(t[0], view(kk)).logits, w);
      },
      inputs, analytic, kH);
  return {"shift L=" + std::to_string(L) + " n=" + std::to_string(n) + " k=" + std::to_string(k),
          r, false};
}

model::ModelConfig small_config(model::Kind kind, std::size_t L, int iterations) {
  model::ModelConfig c;
  c.kind = kind;
  c.categories = 2;
  c.predicates = 3;
  c.encoder = encoder::EncoderConfig::oracle(2, static_cast<int>(4 * L), static_cast<int>(L));
  c.shift_layers = 2;
  c.kernel_size = 3;
  c.shift_channels = 2;
  c.iterations = iterations;
  return c;
}

// Loss gradient of a whole model w.r.t. sampled parameters and every feature.
GradCase model_case(const std::string& label, model::Kind kind, std::size_t L, int iterations, std::uint64_t seed,
                    std::size_t sample, bool end_to_end) {
  const model::ModelConfig cfg = small_config(kind, L, iterations);
  auto m = model::make_model<double>(cfg, seed);
  Rng rng(seed + 100);
  for (std::size_t i = 0; i < m->params().size(); ++i) {
    for (auto& v : m->params().at(i).values()) v = rng.uniform(-0.5, 0.8);
  }
  const D mu = uniform_tensor<double>({L, L, cfg.channels()}, 0, 1, rng);
  D gs({L, L}), go({L, L});
  for (auto& v : gs.values()) v = rng.bernoulli(0.3);
  for (auto& v : go.values()) v = rng.bernoulli(0.3);
  const scene::Query q{0, 1, 1};
  GradStore grads = GradStore::like(m->params());
  D gmu;
  m->loss_and_grad(mu, q, gs, go, grads, &gmu);
  auto probe = model::make_model<double>(cfg, seed);
  const Fn loss = [&](const std::vector<D>& t) {
    probe->load_params(store_of(m->params(), t));
    GradStore ignored = GradStore::like(m->params());
    return probe->loss_and_grad(mu, q, gs, go, ignored, nullptr);
  };
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  if (sample > 0) {
    const std::size_t total = m->params().scalar_count();
    for (std::size_t k = 0; k < sample; ++k) {
      std::size_t flat = static_cast<std::size_t>(rng.below(total)), slot = 0;
      while (flat >= m->params().at(slot).size()) flat -= m->params().at(slot++).size();
      entries.emplace_back(slot, flat);
    }
  }
  const double pe = fd_max_error(loss, tensors_of(m->params()), grads_of(m->params(), grads), kH, entries);
  const Fn f = [&](const std::vector<D>& in) {
    GradStore ignored = GradStore::like(m->params());
    return m->loss_and_grad(in[0], q, gs, go, ignored, nullptr);
  };
  const double me = fd_max_error(f, {mu}, {gmu}, kH);
  return {label + " L=" + std::to_string(L), std::max(pe, me), end_to_end};
}

// Bias shifts keeping every pre-activation at least margin away from zero so
// central differences never straddle a ReLU kink.
void separate_from_kinks(ParamStore<double>& p, encoder::CnnLayout lay, const D& image, std::size_t grid,
                         double margin) {
  for (std::size_t layer = 0; layer < 3; ++layer) {
    encoder::CnnCache<double> cache;
    encoder::cnn_encode(image, p, lay, grid, &cache);
    const D& z = layer == 0 ? cache.z1 : layer == 1 ? cache.z2 : cache.z3;
    auto& bias = p.at(lay.first + 2 * layer + 1);
    const std::size_t C = z.dim(2);
    for (std::size_t c = 0; c < C; ++c) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = c; i < z.size(); i += C) {
        lo = std::min(lo, z[i]);
        hi = std::max(hi, z[i]);
      }
      bias[c] += c % 2 == 0 ? margin - lo : -margin - hi;
    }
  }
}

GradCase encoder_case(int image, int grid, std::uint64_t seed) {
  Rng rng(seed);
  encoder::EncoderConfig cfg = encoder::EncoderConfig::trainable(3, image, grid);
  cfg.width1 = 4;
  cfg.width2 = 5;
  ParamStore<double> p;
  const encoder::CnnLayout lay = encoder::add_cnn_params(p, cfg, rng);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& v : p.at(i).values()) v += rng.uniform(-0.2, 0.2);
  const std::size_t S = static_cast<std::size_t>(image), L = static_cast<std::size_t>(grid);
  const D img = uniform_tensor<double>({S, S, 3}, 0, 1, rng);
  separate_from_kinks(p, lay, img, L, 0.05);
  const D w = uniform_tensor<double>({L, L, 3}, -1, 1, rng);
  encoder::CnnCache<double> cache;
  encoder::cnn_encode(img, p, lay, L, &cache);
  GradStore g = GradStore::like(p);
  encoder::cnn_encode_backward(cache, w, p, lay, g);
  const Fn loss = [&](const std::vector<D>& t) {
    return weighted(encoder::cnn_encode(img, store_of(p, t), lay, L), w);
  };
  return {"encoder " + std::to_string(image) + "px grid " + std::to_string(grid),
          fd_max_error(loss, tensors_of(p), grads_of(p, g), 1e-4), false};
}

}  // namespace

std::vector<GradCase> run_gradient_suite() {
  std::vector<GradCase> out;
  out.push_back(conv_case({6, 6, 2}, {3, 3, 2, 2}, 1));
  out.push_back(conv_case({5, 7, 1}, {5, 5, 1, 3}, 2));
  out.push_back(dense_case(7, 4, 3));
  out.push_back(dense_case(12, 9, 4));
  out.push_back(relu_case({5, 5, 2}, 5));
  out.push_back(relu_case({6, 4, 1}, 6));
  out.push_back(broadcast_case({4, 4, 3}, 7));
  out.push_back(broadcast_case({6, 5, 2}, 8));
  out.push_back(bce_case({5, 5}, 9));
  out.push_back(bce_case({3, 8}, 10));
  out.push_back(attend_case({4, 4, 3}, 11));
  out.push_back(attend_case({7, 5, 6}, 12));
  out.push_back(shift_case(5, 3, 3, 3, 13));
  out.push_back(shift_case(6, 2, 5, 2, 14));
  out.push_back(model_case("co-occurrence fusion", model::Kind::kCooccurrence, 4, 0, 15, 0, false));
  out.push_back(model_case("co-occurrence fusion", model::Kind::kCooccurrence, 5, 0, 16, 0, false));
  out.push_back(model_case("vrd fusion", model::Kind::kVrd, 4, 0, 17, 0, false));
  out.push_back(model_case("vrd fusion", model::Kind::kVrd, 5, 0, 18, 0, false));
  out.push_back(model_case("spatial-shift loss", model::Kind::kSpatialShift, 4, 0, 19, 0, false));
  out.push_back(model_case("spatial-shift loss", model::Kind::kSpatialShift, 5, 0, 20, 0, false));
  out.push_back(encoder_case(16, 4, 21));
  out.push_back(encoder_case(16, 2, 22));
  out.push_back(model_case("ssas end-to-end t=2", model::Kind::kSsas, 4, 2, 23, 12, true));
  out.push_back(model_case("ssas end-to-end t=1", model::Kind::kSsas, 5, 1, 24, 12, true));
  out.push_back(model_case("ssas end-to-end t=3", model::Kind::kSsas, 4, 3, 25, 12, true));
  return out;
}

}  // namespace shiftlab::acceptance

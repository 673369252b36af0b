#include "shiftlab/model/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "shiftlab/core/error.hpp"
#include "shiftlab/core/optimizer.hpp"
#include "shiftlab/core/parallel.hpp"
#include "shiftlab/scene/io.hpp"

namespace shiftlab::model {

Split make_split(const std::vector<scene::Scene>& scenes, const ModelConfig& config) {
  return {&scenes, scene::build_queries(scenes, scene::GridGeometry::make(config.encoder.image_size,
                                                                          config.encoder.grid))};
}

template <typename T>
std::vector<BasicTensor<T>> encode_all(const Model<T>& model, const std::vector<scene::Scene>& scenes,
                                       const scene::Vocabulary& vocab) {
  std::vector<BasicTensor<T>> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) { out[i] = model.encode(scenes[i], vocab); });
  return out;
}

namespace {

template <typename T>
struct ExampleResult {
  double loss = 0.0;
  GradStore grads;
};

std::string param_norms(const auto& params) {
  std::ostringstream os;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double s = 0.0;
    for (auto v : params.at(i).values()) s += static_cast<double>(v) * static_cast<double>(v);
    os << (i ? ", " : "") << params.name(i) << "=" << std::sqrt(s);
  }
  return os.str();
}

bool finite_grads(const GradStore& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.touched(i)) continue;
    for (double v : g.slot(i)) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// Loss (and optionally gradient) of one grounded query.
template <typename T>
double example_loss(const Model<T>& model, const Split& split, const std::vector<BasicTensor<T>>* features,
                    std::size_t index, const scene::Query& q, const scene::Vocabulary& vocab, GradStore* grads) {
  const auto& gq = split.queries[index];
  const BasicTensor<T> gs = gq.subject.grid.template cast<T>(), go = gq.object.grid.template cast<T>();
  GradStore scratch;
  GradStore& g = grads ? *grads : scratch;
  if (!grads) g = GradStore::like(model.params());
  if (!model.trains_encoder()) {
    return model.loss_and_grad((*features)[gq.scene], q, gs, go, g, nullptr);
  }
  encoder::CnnCache<T> cache;
  const BasicTensor<T> mu = model.encode((*split.scenes)[gq.scene], vocab, grads ? &cache : nullptr);
  BasicTensor<T> gmu;
  const double loss = model.loss_and_grad(mu, q, gs, go, g, grads ? &gmu : nullptr);
  if (grads) model.encode_backward(cache, gmu, g);
  return loss;
}

}  // namespace

template <typename T>
double evaluate_loss(const Model<T>& model, const Split& split, const scene::Vocabulary& vocab) {
  if (split.queries.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<BasicTensor<T>> features;
  if (!model.trains_encoder()) features = encode_all(model, *split.scenes, vocab);
  std::vector<double> losses(split.queries.size());
  parallel_for(losses.size(), [&](std::size_t i) {
    losses[i] = example_loss(model, split, &features, i, split.queries[i].query, vocab, nullptr);
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

template <typename T>
TrainResult train(Model<T>& model, const Split& train_split, const Split* val_split, const TrainConfig& config,
                  const scene::Vocabulary& vocab, const TrainHooks& hooks) {
  config.validate();
  if (train_split.queries.empty()) throw ValidationError("training split has no queries");
  RmsPropConfig opt_cfg;
  opt_cfg.learning_rate = config.learning_rate;
  opt_cfg.decay_factor = config.decay_factor;
  opt_cfg.plateau_patience = config.plateau_patience;
  RmsProp opt(opt_cfg);

  std::vector<BasicTensor<T>> features;
  if (!model.trains_encoder()) features = encode_all(model, *train_split.scenes, vocab);

  TrainResult result;
  const std::size_t N = train_split.queries.size();
  const std::size_t B = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng mask_rng(mix_seed(config.seed, 0x10000 + static_cast<std::uint64_t>(epoch)));
    std::vector<scene::Query> queries(N);
    for (std::size_t i = 0; i < N; ++i) {
      const scene::Query& q = train_split.queries[order[i]].query;
      queries[i] = config.mask_rate > 0 ? mask_query(q, config.mask_rate, mask_rng) : q;
    }

    double epoch_loss = 0.0;
    std::size_t batch_index = 0, seen = 0;
    for (std::size_t start = 0; start < N; start += B, ++batch_index) {
      const std::size_t end = std::min(N, start + B);
      std::vector<ExampleResult<T>> parts(end - start);
      parallel_for(parts.size(), [&](std::size_t j) {
        parts[j].grads = GradStore::like(model.params());
        parts[j].loss = example_loss(model, train_split, &features, order[start + j], queries[start + j], vocab,
                                     &parts[j].grads);
      });
      GradStore total = GradStore::like(model.params());
      double batch_loss = 0.0;
      for (const auto& p : parts) {
        batch_loss += p.loss;
        total.add(p.grads);
      }
      const double scale = 1.0 / static_cast<double>(parts.size());
      total.scale(scale);
      batch_loss *= scale;
      if (!std::isfinite(batch_loss) || !finite_grads(total)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (loss " + std::to_string(batch_loss) +
                           "); parameter norms: " + param_norms(model.params()));
      }
      opt.step(model.params(), total);
      epoch_loss += batch_loss * static_cast<double>(parts.size());
      seen += parts.size();
      ++result.steps;
      if (hooks.max_steps && result.steps >= hooks.max_steps) break;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_loss / static_cast<double>(seen);
    entry.val_loss = val_split ? evaluate_loss(model, *val_split, vocab) : std::numeric_limits<double>::quiet_NaN();
    entry.learning_rate = opt.learning_rate();
    entry.seed = config.seed;
    if (!std::isfinite(entry.train_loss) || (val_split && !std::isfinite(entry.val_loss))) {
      throw NumericError("non-finite epoch loss at epoch " + std::to_string(epoch) +
                         "; parameter norms: " + param_norms(model.params()));
    }
    result.log.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);
    opt.end_epoch(val_split ? entry.val_loss : entry.train_loss);
    if (hooks.max_steps && result.steps >= hooks.max_steps) break;
  }
  return result;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,split,loss,lr\n";
  for (const auto& e : log) {
    os << e.epoch << ",train," << e.train_loss << ',' << e.learning_rate << '\n';
    os << e.epoch << ",val,";
    if (std::isfinite(e.val_loss)) {
      os << e.val_loss;
    } else {
      os << '-';
    }
    os << ',' << e.learning_rate << '\n';
  }
  scene::write_text_file(path, os.str());
}

template TrainResult train<float>(Model<float>&, const Split&, const Split*, const TrainConfig&,
                                  const scene::Vocabulary&, const TrainHooks&);
template TrainResult train<double>(Model<double>&, const Split&, const Split*, const TrainConfig&,
                                   const scene::Vocabulary&, const TrainHooks&);
template double evaluate_loss<float>(const Model<float>&, const Split&, const scene::Vocabulary&);
template double evaluate_loss<double>(const Model<double>&, const Split&, const scene::Vocabulary&);
template std::vector<BasicTensor<float>> encode_all<float>(const Model<float>&, const std::vector<scene::Scene>&,
                                                           const scene::Vocabulary&);
template std::vector<BasicTensor<double>> encode_all<double>(const Model<double>&,
                                                             const std::vector<scene::Scene>&,
                                                             const scene::Vocabulary&);

}  // namespace shiftlab::model

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shiftlab/model/model.hpp"
#include "shiftlab/scene/query.hpp"

namespace shiftlab::model {

// Scenes plus their grounded queries; queries index into scenes.
struct Split {
  const std::vector<scene::Scene>* scenes = nullptr;
  std::vector<scene::GroundedQuery> queries;
};

Split make_split(const std::vector<scene::Scene>& scenes, const ModelConfig& config);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t steps = 0;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  // Stop after this many optimizer steps (0 = no limit).
  std::size_t max_steps = 0;
};

// Shuffled mini-batches, mean loss per batch, RMSProp, plateau decay on the
// validation loss (train loss when val is null). Per-example gradients are
// summed in example order so results do not depend on the thread count.
// Throws NumericError on a non-finite loss or gradient.
template <typename T>
TrainResult train(Model<T>& model, const Split& train_split, const Split* val_split, const TrainConfig& config,
                  const scene::Vocabulary& vocab, const TrainHooks& hooks = {});

// Mean per-query loss without updates.
template <typename T>
double evaluate_loss(const Model<T>& model, const Split& split, const scene::Vocabulary& vocab);

// Features for every scene of the split (oracle or CNN forward).
template <typename T>
std::vector<BasicTensor<T>> encode_all(const Model<T>& model, const std::vector<scene::Scene>& scenes,
                                       const scene::Vocabulary& vocab);

// CSV with header epoch,split,loss,lr; one train and one val row per epoch.
void write_train_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace shiftlab::model

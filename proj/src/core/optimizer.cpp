#include "shiftlab/core/optimizer.hpp"

#include <cmath>
#include <string>

namespace shiftlab {

RmsProp::RmsProp(RmsPropConfig config) : config_(config) {
  if (!(config_.learning_rate >= 0.0) || !std::isfinite(config_.learning_rate)) {
    throw ConfigError("RMSProp learning rate must be a finite non-negative number");
  }
  if (!(config_.rho > 0.0 && config_.rho < 1.0)) throw ConfigError("RMSProp rho must be in (0,1)");
  if (!(config_.decay_factor > 0.0 && config_.decay_factor < 1.0)) {
    throw ConfigError("RMSProp decay factor must be in (0,1)");
  }
  if (config_.plateau_patience < 1) throw ConfigError("RMSProp plateau patience must be >= 1");
  state_.learning_rate = config_.learning_rate;
}

template <typename T>
void RmsProp::step(ParamStore<T>& params, const GradStore& grads) {
  if (grads.size() != params.size()) {
    throw DimensionError("RMSProp: " + std::to_string(grads.size()) + " gradient slots for " +
                         std::to_string(params.size()) + " parameters");
  }
  if (state_.mean_square.size() != params.size()) state_.mean_square.resize(params.size());
  const double lr = state_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads.touched(i)) continue;
    auto values = params.at(i).values();
    auto g = grads.slot(i);
    if (g.size() != values.size()) {
      throw DimensionError("RMSProp: gradient for " + params.name(i) + " has wrong size");
    }
    auto& v = state_.mean_square[i];
    if (v.size() != values.size()) v.assign(values.size(), 0.0);
    for (std::size_t j = 0; j < values.size(); ++j) {
      v[j] = config_.rho * v[j] + (1.0 - config_.rho) * g[j] * g[j];
      const double update = lr * g[j] / (std::sqrt(v[j]) + config_.epsilon);
      values[j] = static_cast<T>(static_cast<double>(values[j]) - update);
    }
  }
}

bool RmsProp::end_epoch(double validation_loss) {
  if (validation_loss < state_.best_validation) {
    state_.best_validation = validation_loss;
    state_.stagnant_epochs = 0;
    return false;
  }
  if (++state_.stagnant_epochs >= config_.plateau_patience) {
    state_.learning_rate *= config_.decay_factor;
    state_.stagnant_epochs = 0;
    return true;
  }
  return false;
}

template void RmsProp::step<float>(ParamStore<float>&, const GradStore&);
template void RmsProp::step<double>(ParamStore<double>&, const GradStore&);

}  // namespace shiftlab

#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "shiftlab/core/params.hpp"

namespace shiftlab {

struct RmsPropConfig {
  double learning_rate = 1e-4;
  double rho = 0.9;        // moving-average factor of squared gradients
  double epsilon = 1e-8;
  double decay_factor = 0.7;  // multiplier applied on a validation plateau
  int plateau_patience = 3;   // stagnant epochs before decaying
};

// Per-parameter accumulators plus the plateau schedule state.
struct OptimizerState {
  std::vector<std::vector<double>> mean_square;
  double learning_rate = 0.0;
  double best_validation = std::numeric_limits<double>::infinity();
  int stagnant_epochs = 0;
};

class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig config);

  // v <- rho v + (1 - rho) g^2 ; p <- p - lr g / (sqrt(v) + eps).
  // Untouched gradient slots leave both accumulator and parameter alone.
  template <typename T>
  void step(ParamStore<T>& params, const GradStore& grads);

  // Reports a validation loss; returns true when the learning rate decayed.
  bool end_epoch(double validation_loss);

  double learning_rate() const { return state_.learning_rate; }
  const OptimizerState& state() const { return state_; }
  const RmsPropConfig& config() const { return config_; }

 private:
  RmsPropConfig config_;
  OptimizerState state_;
};

}  // namespace shiftlab

#pragma once

#include "ivaear/nn/tape.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ivaear::nn {

struct AdamConfig {
  double base_rate = 1e-3;
  double end_rate = 1e-4;
  std::int64_t decay_steps = 10000;
  double power = 2.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one flat list of parameter arrays. Accumulators
/// are allocated lazily on the first step to match the parameter shapes.
struct AdamState {
  AdamConfig config;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::int64_t step = 0;
};

/// Polynomial decay: end + (base − end)·(1 − min(step, decay)/decay)^power.
double lr_schedule(std::int64_t step, const AdamConfig& config);

/// One bias-corrected Adam update at rate lr_schedule(state.step); increments
/// state.step.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state);

/// Central differences (f(θ+h) − f(θ−h)) / 2h, one coordinate at a time.
/// `loss` must read the parameters through the spans' storage.
std::vector<Vector> finite_diff_gradient(const std::function<double()>& loss,
                                         std::span<const std::span<double>> params,
                                         double step);

}  // namespace ivaear::nn

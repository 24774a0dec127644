#include "ivaear/nn/adam.hpp"

#include "ivaear/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ivaear::nn {

double lr_schedule(std::int64_t step, const AdamConfig& config) {
  const double frac =
      static_cast<double>(std::min(std::max<std::int64_t>(step, 0), config.decay_steps)) /
      static_cast<double>(config.decay_steps);
  return config.end_rate +
         (config.base_rate - config.end_rate) * std::pow(1.0 - frac, config.power);
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter arrays but " +
                     std::to_string(grads.size()) + " gradient arrays");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size()) {
      throw ShapeError("adam_step: gradient " + std::to_string(k) + " has wrong size");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Vector::Zero(static_cast<Index>(p.size())));
      state.second_moment.push_back(Vector::Zero(static_cast<Index>(p.size())));
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: parameter list changed between steps");
  }

  const AdamConfig& c = state.config;
  const double rate = lr_schedule(state.step, c);
  const double t = static_cast<double>(state.step + 1);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::Map<Vector> p(params[k].data(), static_cast<Index>(params[k].size()));
    Eigen::Map<const Vector> g(grads[k].data(), static_cast<Index>(grads[k].size()));
    Vector& m = state.first_moment[k];
    Vector& v = state.second_moment[k];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    p.array() -= rate * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + c.epsilon);
  }
  ++state.step;
}

std::vector<Vector> finite_diff_gradient(const std::function<double()>& loss,
                                         std::span<const std::span<double>> params,
                                         double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_gradient: step must be positive");
  std::vector<Vector> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Vector g(static_cast<Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss();
      p[i] = saved - step;
      const double down = loss();
      p[i] = saved;
      g(static_cast<Index>(i)) = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace ivaear::nn

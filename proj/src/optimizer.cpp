#include "gates/optimizer.hpp"

#include <cmath>

namespace gates {

void adamw_step(PolicyParams& params, AdamWState& state, const PolicyParams& gradient,
                const AdamWConfig& config) {
  ++state.updates;
  const double t = static_cast<double>(state.updates);
  auto m = state.first_moment.flat().array();
  auto v = state.second_moment.flat().array();
  const auto g = gradient.flat().array();
  m = config.beta1 * m + (1.0 - config.beta1) * g;
  v = config.beta2 * v + (1.0 - config.beta2) * g.square();
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto theta = params.flat().array();
  theta -= config.learning_rate * ((m / c1) / ((v / c2).sqrt() + config.epsilon) + config.weight_decay * theta);
}

double clip_global_norm(PolicyParams& gradient, double max_norm) {
  const double norm = gradient.flat().norm();
  if (max_norm > 0.0 && norm > max_norm) gradient.flat() *= max_norm / norm;
  return norm;
}

}  // namespace gates

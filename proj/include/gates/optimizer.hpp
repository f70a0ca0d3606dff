#pragma once

#include <cstdint>

#include "gates/policy.hpp"

namespace gates {

struct AdamWConfig {
  double learning_rate = 1e-2;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates plus the count of applied updates.
struct AdamWState {
  PolicyParams first_moment;
  PolicyParams second_moment;
  std::int64_t updates = 0;

  static AdamWState zeros_like(const PolicyParams& params) {
    return AdamWState{params.zeros_like(), params.zeros_like(), 0};
  }
  bool operator==(const AdamWState&) const = default;
};

/// One bias-corrected AdamW step with decoupled decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
void adamw_step(PolicyParams& params, AdamWState& state, const PolicyParams& gradient,
                const AdamWConfig& config);

/// Rescales `gradient` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_global_norm(PolicyParams& gradient, double max_norm);

}  // namespace gates

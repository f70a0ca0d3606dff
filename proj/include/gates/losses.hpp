#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gates/consensus.hpp"
#include "gates/policy.hpp"
#include "gates/tokens.hpp"

namespace gates {

/// One rollout as seen by the losses. `prompt` is the conditioning context
/// the loss scores under, which is not always the prompt it was sampled from:
/// off-policy distillation scores tutor completions under the student prompt.
struct TokenEntry {
  std::string question_id;
  Role role = Role::tutor;
  TokenSeq prompt;
  TokenSeq completion;
  bool g = false;  ///< question-level gate
  bool e = false;  ///< eligibility (tutor rollouts)
  bool r = false;  ///< pseudo-correct: answer matches the modal answer
  std::vector<double> weights;  ///< per-token; the clipped advantages for student rollouts
};

struct TokenBatch {
  std::vector<TokenEntry> entries;
};

struct LossWeights {
  double lambda_off = 1.0;
  double lambda_on = 0.1;
  double lambda_cons = 0.0;
  double lambda_kl = 0.02;
  double beta = 1.0;
  double clip_a = 5.0;
};

/// A normalized loss term: value, gradient and its token denominator.
/// A zero denominator means value 0 and an all-zero gradient.
struct LossTerm {
  double value = 0.0;
  PolicyParams gradient;
  std::int64_t tokens = 0;
};

struct LossBreakdown {
  double off = 0.0;
  double on = 0.0;
  double cons = 0.0;
  double kl = 0.0;
  double total = 0.0;
  std::int64_t included_tutor_tokens = 0;
  std::int64_t included_student_tokens = 0;
  PolicyParams gradient;
};

/// -sum_{g e} sum_t log pi(y_t | prompt) / sum_{g e} L.
LossTerm off_policy_loss(const TokenBatch& batch, const PolicyParams& params, int workers = 1);

/// A_t = clip(tutor_t - student_t, -a, a), constants downstream.
std::vector<double> per_token_advantage(const RolloutRecord& student_rollout,
                                        std::span<const double> tutor_logprobs,
                                        std::span<const double> student_logprobs, double clip_a);

/// -sum_g sum_t A_t log pi(y_t | prompt) / sum_g L, with A_t taken from entry weights.
LossTerm on_policy_loss(const TokenBatch& batch, const PolicyParams& params, int workers = 1);

/// -sum_{g r} sum_t log pi(y_t | prompt) / sum_g L. The numerator keeps only
/// pseudo-correct rollouts while the denominator counts every gated one.
LossTerm consensus_reward_loss(const TokenBatch& batch, const PolicyParams& params, int workers = 1);

/// beta * sum_g sum_t KL(pi(.|y_<t) || pi_ref(.|y_<t)) / sum_g L, exact over the vocabulary.
LossTerm kl_to_reference(const TokenBatch& batch, const PolicyParams& params,
                         const PolicyParams& ref_params, double beta, int workers = 1);

struct LossInputs {
  LossTerm off;
  LossTerm on;
  LossTerm cons;
  LossTerm kl;
};

/// Weighted sum of the four terms. Terms whose gradient is empty count as zero.
LossBreakdown total_loss(const LossInputs& terms, const LossWeights& weights);

}  // namespace gates

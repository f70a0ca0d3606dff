#include "gates/losses.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "gates/parallel.hpp"

namespace gates {

namespace {

// Entries are reduced in fixed-size chunks so the floating-point summation
// order, and therefore every bit of the result, does not depend on how many
// workers ran.
constexpr std::size_t kChunk = 8;

struct Partial {
  double value = 0.0;
  PolicyParams gradient;
};

using EntryFn = std::function<double(const TokenEntry&, PolicyParams&)>;

Partial reduce_entries(const TokenBatch& batch, const PolicyParams& params, int workers,
                       const std::function<bool(const TokenEntry&)>& include, const EntryFn& fn) {
  const std::size_t n = batch.entries.size();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Partial> slots(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    Partial& slot = slots[c];
    slot.gradient = params.zeros_like();
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const TokenEntry& entry = batch.entries[i];
      if (include(entry)) slot.value += fn(entry, slot.gradient);
    }
  });
  Partial total;
  total.gradient = params.zeros_like();
  for (const Partial& slot : slots) {
    total.value += slot.value;
    total.gradient += slot.gradient;
  }
  return total;
}

std::int64_t count_tokens(const TokenBatch& batch, const std::function<bool(const TokenEntry&)>& include) {
  std::int64_t n = 0;
  for (const auto& entry : batch.entries)
    if (include(entry)) n += static_cast<std::int64_t>(entry.completion.size());
  return n;
}

LossTerm empty_term(const PolicyParams& params) { return LossTerm{0.0, params.zeros_like(), 0}; }

// -(sum over `numerator` entries of sum_t w_t log pi) / (tokens of `denominator` entries)
LossTerm weighted_nll(const TokenBatch& batch, const PolicyParams& params, int workers,
                      const std::function<bool(const TokenEntry&)>& numerator,
                      const std::function<bool(const TokenEntry&)>& denominator, bool use_weights) {
  const std::int64_t tokens = count_tokens(batch, denominator);
  if (tokens == 0) return empty_term(params);
  const double scale = -1.0 / static_cast<double>(tokens);
  Partial sum = reduce_entries(batch, params, workers, numerator, [&](const TokenEntry& entry, PolicyParams& grad) {
    if (use_weights) return accumulate_logprob_grad(params, entry.prompt, entry.completion, entry.weights, scale, grad);
    const std::vector<double> ones(entry.completion.size(), 1.0);
    return accumulate_logprob_grad(params, entry.prompt, entry.completion, ones, scale, grad);
  });
  return LossTerm{scale * sum.value, std::move(sum.gradient), tokens};
}

}  // namespace

LossTerm off_policy_loss(const TokenBatch& batch, const PolicyParams& params, int workers) {
  auto eligible = [](const TokenEntry& e) { return e.g && e.e; };
  return weighted_nll(batch, params, workers, eligible, eligible, false);
}

std::vector<double> per_token_advantage(const RolloutRecord& student_rollout,
                                        std::span<const double> tutor_logprobs,
                                        std::span<const double> student_logprobs, double clip_a) {
  if (tutor_logprobs.size() != student_logprobs.size() ||
      tutor_logprobs.size() != student_rollout.completion_tokens.size())
    throw std::invalid_argument("per_token_advantage: sequence lengths differ");
  if (!(clip_a > 0.0)) throw std::invalid_argument("per_token_advantage: clip bound must be positive");
  std::vector<double> a(tutor_logprobs.size());
  for (std::size_t t = 0; t < a.size(); ++t)
    a[t] = std::clamp(tutor_logprobs[t] - student_logprobs[t], -clip_a, clip_a);
  return a;
}

LossTerm on_policy_loss(const TokenBatch& batch, const PolicyParams& params, int workers) {
  auto gated = [](const TokenEntry& e) { return e.g; };
  for (const auto& entry : batch.entries)
    if (entry.g && entry.weights.size() != entry.completion.size())
      throw std::invalid_argument("on_policy_loss: advantages and completion lengths differ");
  return weighted_nll(batch, params, workers, gated, gated, true);
}

LossTerm consensus_reward_loss(const TokenBatch& batch, const PolicyParams& params, int workers) {
  return weighted_nll(
      batch, params, workers, [](const TokenEntry& e) { return e.g && e.r; },
      [](const TokenEntry& e) { return e.g; }, false);
}

LossTerm kl_to_reference(const TokenBatch& batch, const PolicyParams& params,
                         const PolicyParams& ref_params, double beta, int workers) {
  if (!(params.shape() == ref_params.shape()))
    throw std::invalid_argument("kl_to_reference: reference shape differs");
  auto gated = [](const TokenEntry& e) { return e.g; };
  const std::int64_t tokens = count_tokens(batch, gated);
  if (tokens == 0) return empty_term(params);
  const double scale = beta / static_cast<double>(tokens);
  Partial sum = reduce_entries(batch, params, workers, gated, [&](const TokenEntry& entry, PolicyParams& grad) {
    if (entry.completion.empty()) return 0.0;
    const auto f = ngram_forward(params, entry.prompt, entry.completion, kPadToken);
    const auto fr = ngram_forward(ref_params, entry.prompt, entry.completion, kPadToken);
    const Eigen::MatrixXd p = f.log_probs.array().exp().matrix();
    const Eigen::MatrixXd diff = f.log_probs - fr.log_probs;
    // KL_t = sum_i p_i (log p_i - log q_i); dKL_t/dlogit_i = p_i (log p_i - log q_i - KL_t)
    const Eigen::RowVectorXd kl = (p.array() * diff.array()).colwise().sum();
    Eigen::MatrixXd dlogits = p.array() * (diff.rowwise() - kl).array();
    dlogits *= scale;
    ngram_backward(params, entry.prompt, f, dlogits, grad);
    return kl.sum();
  });
  return LossTerm{scale * sum.value, std::move(sum.gradient), tokens};
}

LossBreakdown total_loss(const LossInputs& terms, const LossWeights& w) {
  LossBreakdown out;
  out.off = terms.off.value;
  out.on = terms.on.value;
  out.cons = terms.cons.value;
  out.kl = terms.kl.value;
  out.total = w.lambda_off * out.off + w.lambda_on * out.on + w.lambda_cons * out.cons + w.lambda_kl * out.kl;

  const LossTerm* parts[] = {&terms.off, &terms.on, &terms.cons, &terms.kl};
  const double lambdas[] = {w.lambda_off, w.lambda_on, w.lambda_cons, w.lambda_kl};
  for (const LossTerm* t : parts) {
    if (t->gradient.size() > 0) {
      out.gradient = t->gradient.zeros_like();
      break;
    }
  }
  for (int i = 0; i < 4; ++i) {
    if (lambdas[i] != 0.0 && parts[i]->gradient.size() > 0)
      out.gradient.flat() += lambdas[i] * parts[i]->gradient.flat();
  }

  auto counted = [](double lambda, const LossTerm& t) { return lambda != 0.0 ? t.tokens : std::int64_t{0}; };
  out.included_tutor_tokens = std::max(counted(w.lambda_off, terms.off), counted(w.lambda_cons, terms.cons));
  out.included_student_tokens = std::max(counted(w.lambda_on, terms.on), counted(w.lambda_kl, terms.kl));
  return out;
}

}  // namespace gates

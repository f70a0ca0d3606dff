#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gates/consensus.hpp"
#include "gates/ngram_model.hpp"
#include "gates/tokens.hpp"
#include "gates/vocabulary.hpp"

namespace gates {

using PolicyParams = NgramParams<double>;

/// Tutor prompts carry the document; student prompts never do.
struct PromptSpec {
  Role role = Role::student;
  std::optional<std::string> document;
  std::string question;
};

/// Prompt text; ends with exactly "Solution:" and no trailing whitespace.
std::string render_prompt_text(const PromptSpec& spec);

/// Tokenized prompt. Throws DataError if the last token is not "Solution:".
TokenSeq render_prompt(const PromptSpec& spec, const Vocabulary& vocab);

struct SamplingConfig {
  double temperature = 0.5;  ///< 0 selects greedy argmax
  double top_p = 1.0;
  std::optional<int> top_k;  ///< disabled when empty
  int max_tokens = 512;
  std::uint64_t seed = 0;
};

/// `count` autoregressive rollouts. Rollout j draws from its own stream
/// derived from (config.seed, j). Temperature is applied before top-k and
/// top-p; ties in the top-p ordering break by token id. Recorded
/// log-probabilities are the untempered model's, so score() reproduces them.
/// Validity and leakage are filled in; question_id and role are left to the caller.
std::vector<RolloutRecord> sample(const PolicyParams& params, const Vocabulary& vocab,
                                  std::span<const TokenId> prompt, const SamplingConfig& config,
                                  int count);

/// log pi(y_t | y_<t, prompt) for every completion token.
std::vector<double> score(const PolicyParams& params, std::span<const TokenId> prompt,
                          std::span<const TokenId> completion);

/// Full next-token distribution after prompt ++ prefix.
Eigen::VectorXd next_token_distribution(const PolicyParams& params, std::span<const TokenId> prompt,
                                        std::span<const TokenId> prefix);

struct ValueAndGradient {
  double value = 0.0;
  PolicyParams gradient;
};

/// sum_t w_t log pi(y_t | y_<t, prompt) and its exact gradient.
/// Throws NumericalError if the gradient is not finite.
ValueAndGradient logprob_with_grad(const PolicyParams& params, std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion,
                                   std::span<const double> token_weights);

/// Same sum; adds scale * gradient into `grad` instead of allocating.
double accumulate_logprob_grad(const PolicyParams& params, std::span<const TokenId> prompt,
                               std::span<const TokenId> completion,
                               std::span<const double> token_weights, double scale,
                               PolicyParams& grad);

/// Anything that can answer a question under a role's prompt.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<RolloutRecord> generate(const PromptSpec& prompt, std::string_view question_id,
                                              const SamplingConfig& config, int count) const = 0;
};

/// The trainable n-gram model behind the Policy interface.
class NgramPolicy final : public Policy {
 public:
  NgramPolicy(const PolicyParams& params, const Vocabulary& vocab) : params_(params), vocab_(vocab) {}

  std::vector<RolloutRecord> generate(const PromptSpec& prompt, std::string_view question_id,
                                      const SamplingConfig& config, int count) const override;

  const PolicyParams& params() const { return params_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  const PolicyParams& params_;
  const Vocabulary& vocab_;
};

}  // namespace gates

#include "gates/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gates/errors.hpp"
#include "gates/rng.hpp"

namespace gates {

namespace {

constexpr std::string_view kInstructions =
    "Solve this step by step.\n"
    "Show your work, then put your FINAL answer in \\boxed{} at the very end.\n";

}  // namespace

std::string render_prompt_text(const PromptSpec& spec) {
  if (spec.question.empty()) throw std::invalid_argument("render_prompt: empty question");
  if (spec.role == Role::tutor && !spec.document)
    throw std::invalid_argument("render_prompt: tutor prompt requires a document");
  if (spec.role == Role::student && spec.document)
    throw std::invalid_argument("render_prompt: student prompt must not carry a document");

  std::string text;
  if (spec.role == Role::tutor) {
    text += "Document:\n";
    text += *spec.document;
    text += "\n\n";
  }
  text += "Question:\n";
  text += spec.question;
  text += "\n\n";
  text += kInstructions;
  if (spec.role == Role::tutor) text += "Do NOT mention the document, passage, or text. ";
  text += "Just answer directly.\n\nSolution:";
  return text;
}

TokenSeq render_prompt(const PromptSpec& spec, const Vocabulary& vocab) {
  TokenSeq tokens = vocab.tokenize(render_prompt_text(spec));
  if (tokens.empty() || tokens.back() != vocab.solution())
    throw DataError("rendered prompt does not end with the 'Solution:' token");
  return tokens;
}

namespace {

TokenId choose_token(const Eigen::VectorXd& log_probs, const SamplingConfig& config, Rng& rng,
                     std::vector<int>& order, Eigen::VectorXd& weights) {
  const auto V = static_cast<int>(log_probs.size());
  if (config.temperature <= 0.0) {
    Eigen::Index best = 0;
    log_probs.maxCoeff(&best);  // first maximum, i.e. lowest id on ties
    return static_cast<TokenId>(best);
  }
  Eigen::VectorXd scaled = log_probs / config.temperature;
  weights = (scaled.array() - scaled.maxCoeff()).exp().matrix();

  const bool truncate = config.top_p < 1.0 || config.top_k.has_value();
  if (!truncate) {
    const double u = rng.uniform() * weights.sum();
    double acc = 0.0;
    for (int v = 0; v < V; ++v) {
      acc += weights[v];
      if (u < acc) return v;
    }
    return V - 1;
  }

  order.resize(static_cast<std::size_t>(V));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weights[a] > weights[b]; });
  std::size_t keep = order.size();
  if (config.top_k && *config.top_k > 0) keep = std::min(keep, static_cast<std::size_t>(*config.top_k));
  const double total = std::accumulate(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), 0.0,
                                       [&](double s, int v) { return s + weights[v]; });
  if (config.top_p < 1.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
      acc += weights[order[i]] / total;
      if (acc >= config.top_p) {
        keep = i + 1;
        break;
      }
    }
  }
  double kept = 0.0;
  for (std::size_t i = 0; i < keep; ++i) kept += weights[order[i]];
  const double u = rng.uniform() * kept;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += weights[order[i]];
    if (u < acc) return order[i];
  }
  return order[keep - 1];
}

}  // namespace

std::vector<RolloutRecord> sample(const PolicyParams& params, const Vocabulary& vocab,
                                  std::span<const TokenId> prompt, const SamplingConfig& config,
                                  int count) {
  if (prompt.empty()) throw std::invalid_argument("sample: empty prompt");
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  if (params.shape().vocab != vocab.size())
    throw std::invalid_argument("sample: parameter vocabulary size does not match the vocabulary");

  const Eigen::VectorXd summary = detail::prompt_summary(params, prompt);
  std::vector<RolloutRecord> out(static_cast<std::size_t>(count));
  std::vector<int> order;
  Eigen::VectorXd weights;
  for (int j = 0; j < count; ++j) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(j)));
    RolloutRecord& r = out[static_cast<std::size_t>(j)];
    r.prompt_tokens.assign(prompt.begin(), prompt.end());
    while (static_cast<int>(r.completion_tokens.size()) < config.max_tokens) {
      const Eigen::VectorXd lp =
          ngram_next_log_probs(params, prompt, std::span<const TokenId>(r.completion_tokens), summary, kPadToken);
      const TokenId tok = choose_token(lp, config, rng, order, weights);
      r.completion_tokens.push_back(tok);
      if (tok == vocab.eos()) {
        r.ended_with_eos = true;
        break;
      }
    }
    // Recorded through the same batched pass as score().
    r.token_logprobs = score(params, prompt, r.completion_tokens);
    r.completion_text = vocab.detokenize(r.completion_tokens);
    check_validity(r, GenerationLimits{config.max_tokens});
    r.leakage = detect_leakage(r.completion_text, default_leakage_keywords());
  }
  return out;
}

std::vector<double> score(const PolicyParams& params, std::span<const TokenId> prompt,
                          std::span<const TokenId> completion) {
  std::vector<double> out(completion.size());
  if (completion.empty()) return out;
  const auto f = ngram_forward(params, prompt, completion, kPadToken);
  for (std::size_t t = 0; t < completion.size(); ++t) {
    out[t] = f.log_probs(completion[t], static_cast<Eigen::Index>(t));
  }
  return out;
}

Eigen::VectorXd next_token_distribution(const PolicyParams& params, std::span<const TokenId> prompt,
                                        std::span<const TokenId> prefix) {
  const Eigen::VectorXd summary = detail::prompt_summary(params, prompt);
  return ngram_next_log_probs(params, prompt, prefix, summary, kPadToken).array().exp().matrix();
}

double accumulate_logprob_grad(const PolicyParams& params, std::span<const TokenId> prompt,
                               std::span<const TokenId> completion,
                               std::span<const double> token_weights, double scale,
                               PolicyParams& grad) {
  if (token_weights.size() != completion.size())
    throw std::invalid_argument("logprob_with_grad: weights and completion lengths differ");
  if (completion.empty()) return 0.0;
  const auto f = ngram_forward(params, prompt, completion, kPadToken);
  const auto L = static_cast<Eigen::Index>(completion.size());
  // d/dlogits of w * log softmax(logits)[y] = w * (onehot(y) - p)
  Eigen::MatrixXd dlogits = -f.log_probs.array().exp().matrix();
  double value = 0.0;
  bool any = false;
  for (Eigen::Index t = 0; t < L; ++t) {
    const double w = token_weights[static_cast<std::size_t>(t)];
    const TokenId y = completion[static_cast<std::size_t>(t)];
    value += w * f.log_probs(y, t);
    dlogits(y, t) += 1.0;
    dlogits.col(t) *= w * scale;
    any = any || w != 0.0;
  }
  if (any && scale != 0.0) ngram_backward(params, prompt, f, dlogits, grad);
  return value;
}

ValueAndGradient logprob_with_grad(const PolicyParams& params, std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion,
                                   std::span<const double> token_weights) {
  ValueAndGradient out{0.0, params.zeros_like()};
  out.value = accumulate_logprob_grad(params, prompt, completion, token_weights, 1.0, out.gradient);
  if (!out.gradient.flat().allFinite() || !std::isfinite(out.value))
    throw NumericalError("logprob_with_grad: non-finite value or gradient");
  return out;
}

std::vector<RolloutRecord> NgramPolicy::generate(const PromptSpec& prompt, std::string_view question_id,
                                                 const SamplingConfig& config, int count) const {
  const TokenSeq tokens = render_prompt(prompt, vocab_);
  std::vector<RolloutRecord> out = sample(params_, vocab_, tokens, config, count);
  for (auto& r : out) {
    r.question_id = std::string(question_id);
    r.role = prompt.role;
  }
  return out;
}

}  // namespace gates

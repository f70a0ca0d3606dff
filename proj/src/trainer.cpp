#include "gates/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gates/errors.hpp"
#include "gates/parallel.hpp"
#include "gates/rng.hpp"

namespace gates {

void TrainerConfig::validate() const {
  if (n < 1) throw ConfigError("trainer.n must be >= 1");
  if (k < 1) throw ConfigError("trainer.k must be >= 1");
  if (tau < 1 || tau > k)
    throw ConfigError("trainer.tau must satisfy 1 <= tau <= k (tau=" + std::to_string(tau) +
                      ", k=" + std::to_string(k) + ")");
  if (learning_rate < 0.0 || weight_decay < 0.0 || grad_clip_norm < 0.0)
    throw ConfigError("learning rate, weight decay and clip norm must be nonnegative");
  if (epochs < 0) throw ConfigError("trainer.epochs must be >= 0");
  if (sampling.temperature < 0.0) throw ConfigError("sampling.temperature must be >= 0");
  if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0)) throw ConfigError("sampling.top_p must be in (0, 1]");
  if (sampling.top_k && *sampling.top_k < 1) throw ConfigError("sampling.top_k must be positive");
  if (sampling.max_tokens < 1) throw ConfigError("sampling.max_tokens must be >= 1");
  const LossWeights& w = weights;
  if (w.lambda_off < 0 || w.lambda_on < 0 || w.lambda_cons < 0 || w.lambda_kl < 0 || w.beta < 0)
    throw ConfigError("loss coefficients must be nonnegative");
  if (!(w.clip_a > 0.0)) throw ConfigError("losses.clip_a must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

TrainState TrainState::initialize(const PolicyParams& params, std::uint64_t seed) {
  TrainState s;
  s.params = params;
  s.ref_params = params;
  s.optimizer = AdamWState::zeros_like(params);
  s.seed = seed;
  return s;
}

namespace {

enum RoleStream : std::uint64_t { kTutorStream = 1, kStudentStream = 2, kBuildStream = 3 };

SamplingConfig seeded(const SamplingConfig& base, std::uint64_t seed) {
  SamplingConfig c = base;
  c.seed = seed;
  return c;
}

struct QuestionWork {
  TokenSeq tutor_prompt;
  TokenSeq student_prompt;
  std::vector<RolloutRecord> tutor;
  std::vector<RolloutRecord> student;
  bool gate = false;
  bool tie = false;
  std::vector<bool> eligible;
  std::vector<bool> pseudo_correct;
  std::vector<std::vector<double>> advantages;  ///< per student rollout; empty when unused
};

QuestionWork process_question(const PolicyParams& params, const QuestionRecord& q, const Vocabulary& vocab,
                              const TrainerConfig& config, std::uint64_t master, std::int64_t step) {
  QuestionWork w;
  w.tutor_prompt = render_prompt(PromptSpec{Role::tutor, q.document, q.question}, vocab);
  w.student_prompt = render_prompt(PromptSpec{Role::student, std::nullopt, q.question}, vocab);
  const std::uint64_t qh = hash_text(q.question_id);
  const auto st = static_cast<std::uint64_t>(step);
  // Tutor and student read the same parameter object; only the prompt differs.
  w.tutor = sample(params, vocab, w.tutor_prompt, seeded(config.sampling, derive_seed(master, st, qh, kTutorStream)), config.k);
  w.student = sample(params, vocab, w.student_prompt, seeded(config.sampling, derive_seed(master, st, qh, kStudentStream)), config.k);
  for (auto& r : w.tutor) {
    r.question_id = q.question_id;
    r.role = Role::tutor;
  }
  for (auto& r : w.student) {
    r.question_id = q.question_id;
    r.role = Role::student;
  }

  std::vector<std::optional<CanonicalAnswer>> answers;
  answers.reserve(w.tutor.size());
  for (const auto& r : w.tutor) answers.push_back(r.valid ? r.extracted : std::nullopt);
  const ConsensusReport report = compute_consensus(answers, config.tau, config.k, q.question_id);
  w.tie = report.tie;
  w.eligible.assign(w.tutor.size(), false);
  w.pseudo_correct.assign(w.tutor.size(), false);
  if (config.gate_enabled) {
    w.gate = report.gate;
    const EligibilityMask mask = compute_eligibility(report, w.tutor);
    w.eligible = mask.e;
  } else {
    w.gate = true;
    for (std::size_t j = 0; j < w.tutor.size(); ++j) w.eligible[j] = w.tutor[j].valid && !w.tutor[j].leakage;
  }
  if (report.modal_answer) {
    for (std::size_t j = 0; j < w.tutor.size(); ++j) {
      const RolloutRecord& r = w.tutor[j];
      w.pseudo_correct[j] = r.valid && !r.leakage && *r.extracted == *report.modal_answer;
    }
  }

  w.advantages.resize(w.student.size());
  if (w.gate && config.weights.lambda_on != 0.0) {
    for (std::size_t j = 0; j < w.student.size(); ++j) {
      const RolloutRecord& r = w.student[j];
      if (!r.valid) continue;
      // Fresh scores: the tutor side needs the document context, which
      // sampling under the student prompt never saw.
      const std::vector<double> tutor_lp = score(params, w.tutor_prompt, r.completion_tokens);
      const std::vector<double> student_lp = score(params, w.student_prompt, r.completion_tokens);
      w.advantages[j] = per_token_advantage(r, tutor_lp, student_lp, config.weights.clip_a);
    }
  }
  return w;
}

}  // namespace

StepReport run_training_step(TrainState& state, std::span<const QuestionRecord> questions,
                             const Vocabulary& vocab, const TrainerConfig& config) {
  config.validate();
  if (state.params.shape().vocab != vocab.size())
    throw ConfigError("parameter vocabulary does not match the dataset vocabulary");
  const PolicyParams& params = state.params;

  std::vector<QuestionWork> work(questions.size());
  parallel_for(questions.size(), config.workers, [&](std::size_t i) {
    work[i] = process_question(params, questions[i], vocab, config, state.seed, state.step);
  });

  StepReport report;
  report.step = state.step;
  report.questions = static_cast<int>(questions.size());
  const LossWeights& lw = config.weights;
  TokenBatch off, on, cons, kl;
  int gated = 0, ties = 0, eligible = 0, tutor_valid = 0, student_valid = 0, leaks = 0;
  int tutor_total = 0, student_total = 0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const QuestionWork& w = work[i];
    const std::string& qid = questions[i].question_id;
    gated += w.gate ? 1 : 0;
    ties += w.tie ? 1 : 0;
    for (std::size_t j = 0; j < w.tutor.size(); ++j) {
      const RolloutRecord& r = w.tutor[j];
      ++tutor_total;
      tutor_valid += r.valid ? 1 : 0;
      leaks += r.leakage ? 1 : 0;
      eligible += w.eligible[j] ? 1 : 0;
      if (!w.gate) continue;
      if (lw.lambda_off != 0.0 && w.eligible[j])
        off.entries.push_back(TokenEntry{qid, Role::tutor, w.student_prompt, r.completion_tokens, true, true,
                                         w.pseudo_correct[j], {}});
      if (lw.lambda_cons != 0.0)
        cons.entries.push_back(TokenEntry{qid, Role::tutor, w.tutor_prompt, r.completion_tokens, true,
                                          w.eligible[j], w.pseudo_correct[j], {}});
    }
    for (std::size_t j = 0; j < w.student.size(); ++j) {
      const RolloutRecord& r = w.student[j];
      ++student_total;
      student_valid += r.valid ? 1 : 0;
      if (!w.gate) continue;
      if (lw.lambda_on != 0.0 && r.valid)
        on.entries.push_back(TokenEntry{qid, Role::student, w.student_prompt, r.completion_tokens, true, false,
                                        false, w.advantages[j]});
      if (lw.lambda_kl != 0.0)
        kl.entries.push_back(TokenEntry{qid, Role::student, w.student_prompt, r.completion_tokens, true, false,
                                        false, {}});
    }
  }

  LossInputs terms;
  terms.off = off_policy_loss(off, params, config.workers);
  terms.on = on_policy_loss(on, params, config.workers);
  terms.cons = consensus_reward_loss(cons, params, config.workers);
  terms.kl = kl_to_reference(kl, params, state.ref_params, lw.beta, config.workers);
  LossBreakdown losses = total_loss(terms, lw);

  if (!std::isfinite(losses.total) || !losses.gradient.flat().allFinite()) {
    throw NumericalError("non-finite loss at step " + std::to_string(state.step) + " (off=" +
                         std::to_string(losses.off) + ", on=" + std::to_string(losses.on) +
                         ", cons=" + std::to_string(losses.cons) + ", kl=" + std::to_string(losses.kl) + ")");
  }

  const auto frac = [](int num, int den) { return den > 0 ? static_cast<double>(num) / den : 0.0; };
  report.gate_rate = frac(gated, report.questions);
  report.tie_rate = frac(ties, report.questions);
  report.eligible_fraction = frac(eligible, gated * config.k);
  report.tutor_validity_rate = frac(tutor_valid, tutor_total);
  report.student_validity_rate = frac(student_valid, student_total);
  report.validity_rate = frac(tutor_valid + student_valid, tutor_total + student_total);
  report.leakage_rate = frac(leaks, tutor_total);

  if (losses.included_tutor_tokens + losses.included_student_tokens > 0) {
    report.grad_norm_pre_clip = clip_global_norm(losses.gradient, config.grad_clip_norm);
    AdamWConfig adam;
    adam.learning_rate = config.learning_rate;
    adam.weight_decay = config.weight_decay;
    adamw_step(state.params, state.optimizer, losses.gradient, adam);
    report.update_applied = true;
  }
  losses.gradient = PolicyParams();
  report.losses = std::move(losses);
  ++state.step;
  return report;
}

std::vector<StepReport> run_epoch(TrainState& state, std::span<const QuestionRecord> train,
                                  const Vocabulary& vocab, const TrainerConfig& config,
                                  const std::function<void(const StepReport&)>& on_step) {
  config.validate();
  std::vector<StepReport> reports;
  if (train.empty()) return reports;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(state.seed, hash_text("epoch"), static_cast<std::uint64_t>(state.epoch)));
  rng.shuffle(order);
  const auto n = static_cast<std::size_t>(config.n);
  std::vector<QuestionRecord> batch;
  for (std::size_t start = 0; start < order.size(); start += n) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + n); ++i) batch.push_back(train[order[i]]);
    reports.push_back(run_training_step(state, batch, vocab, config));
    if (on_step) on_step(reports.back());
  }
  ++state.epoch;
  return reports;
}

DatasetSplits build_fixed_challenger_dataset(std::span<const QuestionRecord> candidates, const Policy& tutor,
                                             const DatasetBuildConfig& config) {
  if (config.k < 1 || config.min_agree < 1 || config.min_agree > config.k)
    throw ConfigError("dataset filter needs 1 <= min_agree <= k");
  if (config.heldout_fraction < 0.0 || config.heldout_fraction > 1.0)
    throw ConfigError("dataset.heldout_fraction must be in [0, 1]");
  enum class Outcome { kept, leakage, disagreement };
  std::vector<Outcome> outcome(candidates.size(), Outcome::disagreement);
  std::vector<std::optional<CanonicalAnswer>> modal(candidates.size());
  parallel_for(candidates.size(), config.workers, [&](std::size_t i) {
    const QuestionRecord& q = candidates[i];
    if (detect_leakage(q.question, default_leakage_keywords())) {
      outcome[i] = Outcome::leakage;
      return;
    }
    const SamplingConfig sc = seeded(config.sampling, derive_seed(config.seed, hash_text(q.question_id), kBuildStream));
    const auto rollouts = tutor.generate(PromptSpec{Role::tutor, q.document, q.question}, q.question_id, sc, config.k);
    std::vector<std::optional<CanonicalAnswer>> answers;
    for (const auto& r : rollouts) answers.push_back(r.valid ? r.extracted : std::nullopt);
    const ConsensusReport report = compute_consensus(answers, config.min_agree, config.k, q.question_id);
    if (report.gate) {
      outcome[i] = Outcome::kept;
      modal[i] = report.modal_answer;
    }
  });

  DatasetSplits out;
  out.candidates = static_cast<int>(candidates.size());
  std::vector<QuestionRecord> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (outcome[i] == Outcome::leakage) {
      ++out.dropped_leakage;
    } else if (outcome[i] == Outcome::disagreement) {
      ++out.dropped_disagreement;
    } else {
      QuestionRecord q = candidates[i];
      q.build_consensus_answer = modal[i];
      kept.push_back(std::move(q));
    }
  }
  if (kept.empty()) throw DataError("dataset build retained no questions; the tutor never reached agreement");

  Rng rng(derive_seed(config.seed, hash_text("split")));
  if (config.heldout_family) {
    for (auto& q : kept) (config.heldout_family(q) ? out.heldout : out.train).push_back(std::move(q));
    rng.shuffle(out.train);
    rng.shuffle(out.heldout);
  } else {
    rng.shuffle(kept);
    const auto cut = static_cast<std::size_t>(
        std::lround(config.heldout_fraction * static_cast<double>(kept.size())));
    out.heldout.assign(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(cut));
    out.train.assign(kept.begin() + static_cast<std::ptrdiff_t>(cut), kept.end());
  }
  return out;
}

}  // namespace gates

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gates/consensus.hpp"
#include "gates/losses.hpp"
#include "gates/optimizer.hpp"
#include "gates/policy.hpp"
#include "gates/question.hpp"
#include "gates/vocabulary.hpp"

namespace gates {

struct TrainerConfig {
  int n = 32;    ///< questions per step
  int k = 8;     ///< rollouts per role per question
  int tau = 4;   ///< gate threshold
  SamplingConfig sampling;
  LossWeights weights;
  double learning_rate = 1e-2;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
  int epochs = 1;
  std::uint64_t seed = 0;
  /// false replaces the gate by g = 1 everywhere and eligibility by validity
  /// and leakage alone (the gate ablation).
  bool gate_enabled = true;
  int workers = 1;

  /// Throws ConfigError on a violated range.
  void validate() const;
};

struct TrainState {
  PolicyParams params;
  PolicyParams ref_params;  ///< frozen snapshot taken at initialization
  AdamWState optimizer;
  std::int64_t step = 0;   ///< training steps attempted, skipped ones included
  std::int64_t epoch = 0;  ///< completed epochs
  std::uint64_t seed = 0;  ///< master seed of the run

  static TrainState initialize(const PolicyParams& params, std::uint64_t seed);
  bool operator==(const TrainState&) const = default;
};

struct StepReport {
  std::int64_t step = 0;
  int questions = 0;
  double gate_rate = 0.0;
  double eligible_fraction = 0.0;  ///< eligible / gated tutor rollouts
  double tie_rate = 0.0;
  double validity_rate = 0.0;      ///< over tutor and student rollouts
  double tutor_validity_rate = 0.0;
  double student_validity_rate = 0.0;
  double leakage_rate = 0.0;       ///< over tutor rollouts
  LossBreakdown losses;            ///< gradient is dropped once applied
  double grad_norm_pre_clip = 0.0;
  bool update_applied = false;
};

/// The three-phase step: sample k tutor rollouts under (d, q) and k student
/// rollouts under q with the one shared parameter set, gate and mark
/// eligibility, then take one clipped AdamW step on the combined loss.
///
/// The step counter always advances. When no loss term includes a token the
/// optimizer is not called and parameters and moments stay bit-identical.
/// On a non-finite loss or gradient, throws NumericalError and leaves
/// `state` untouched.
StepReport run_training_step(TrainState& state, std::span<const QuestionRecord> questions,
                             const Vocabulary& vocab, const TrainerConfig& config);

/// Seeded shuffle of the split (the epoch index is folded into the seed),
/// then consecutive batches of n; the final partial batch is trained.
std::vector<StepReport> run_epoch(TrainState& state, std::span<const QuestionRecord> train,
                                  const Vocabulary& vocab, const TrainerConfig& config,
                                  const std::function<void(const StepReport&)>& on_step = {});

struct DatasetBuildConfig {
  int k = 8;
  int min_agree = 5;
  SamplingConfig sampling;
  double heldout_fraction = 0.5;  ///< used when no family rule is given
  std::uint64_t seed = 0;
  int workers = 1;
  /// Routes a question to the held-out split by family instead of by fraction.
  std::function<bool(const QuestionRecord&)> heldout_family;
};

struct DatasetSplits {
  std::vector<QuestionRecord> train;
  std::vector<QuestionRecord> heldout;
  int candidates = 0;
  int dropped_leakage = 0;
  int dropped_disagreement = 0;
};

/// Keeps a candidate iff its question has no leakage keyword and at least
/// min_agree of k tutor rollouts extract the same answer. Retained questions
/// are split and each split is put in a seeded order.
/// Throws DataError when nothing is retained.
DatasetSplits build_fixed_challenger_dataset(std::span<const QuestionRecord> candidates, const Policy& tutor,
                                             const DatasetBuildConfig& config);

}  // namespace gates

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gates/consensus.hpp"
#include "gates/policy.hpp"
#include "gates/rng.hpp"

namespace gates {

/// Categorical answer distribution of an idealized tutor: independent draws,
/// one category per rollout, plus an abstention mass for invalid rollouts.
struct TutorAnswerModel {
  std::vector<double> probs;
  int correct_index = 0;
  double invalid_prob = 0.0;
  /// Answer text per category; empty means "1", "2", ... in category order.
  std::vector<std::string> labels;

  int categories() const { return static_cast<int>(probs.size()); }
  std::string label(int category) const;
  /// Throws std::invalid_argument unless probs >= 0, sum(probs) + invalid = 1
  /// within 1e-9, correct_index is in range and labels are distinct answers.
  void validate() const;
};

/// Category index, or -1 for an invalid rollout.
int sample_category(const TutorAnswerModel& model, Rng& rng);

/// Templated solution text for a category (-1 renders without a boxed answer).
/// Integer labels are written in one of several equivalent surface forms
/// chosen by `variant`, so clustering has to go through canonicalization.
std::string render_tutor_solution(const TutorAnswerModel& model, int category, int variant);

inline constexpr int kTutorVariants = 3;

/// Rollout for a fixed category and surface variant, with the ordinary
/// validity and leakage checks run on the rendered text.
RolloutRecord scripted_tutor_rollout(const TutorAnswerModel& model, std::string_view question_id, int category,
                                     int variant);

/// One scripted tutor rollout: sample a category and a variant, then render
/// and check it.
RolloutRecord synthetic_tutor_respond(const TutorAnswerModel& model, std::string_view question_id,
                                      std::uint64_t seed);
/// Same, drawing from a caller-owned stream.
RolloutRecord synthetic_tutor_respond(const TutorAnswerModel& model, std::string_view question_id, Rng& rng);

/// Policy that always states a known answer; stands in for the external
/// labeling model when grading synthetic questions.
class ScriptedOracle final : public Policy {
 public:
  explicit ScriptedOracle(std::map<std::string, std::string> answers) : answers_(std::move(answers)) {}

  std::vector<RolloutRecord> generate(const PromptSpec& prompt, std::string_view question_id,
                                      const SamplingConfig& config, int count) const override;

 private:
  std::map<std::string, std::string> answers_;
};

}  // namespace gates

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gates/answer.hpp"
#include "gates/policy.hpp"
#include "gates/question.hpp"
#include "gates/vocabulary.hpp"

namespace gates {

enum class EvalMode { greedy, maj_k, pass_k };

std::string_view eval_mode_name(EvalMode mode);
/// Throws ConfigError for unknown names.
EvalMode parse_eval_mode(std::string_view name);

struct EvalConfig {
  EvalMode mode = EvalMode::greedy;
  int samples = 1;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::uint64_t seed = 0;
  int workers = 1;

  static EvalConfig greedy() { return EvalConfig{}; }
  static EvalConfig majority(int k = 8) { return EvalConfig{EvalMode::maj_k, k, 0.6, 1024, 0, 1}; }
  static EvalConfig pass(int k = 8) { return EvalConfig{EvalMode::pass_k, k, 0.6, 1024, 0, 1}; }

  /// Greedy forces one sample at temperature 0.
  void validate() const;
};

struct QuestionVerdict {
  std::string question_id;
  Role role = Role::student;
  std::vector<std::optional<CanonicalAnswer>> predictions;
  std::optional<bool> verdict;  ///< empty when the question has no gold label

  bool operator==(const QuestionVerdict&) const = default;
};

struct EvalReport {
  EvalMode mode = EvalMode::greedy;
  Role role = Role::student;
  std::vector<QuestionVerdict> per_question;  ///< ordered by question_id
  double accuracy = 0.0;       ///< over labeled questions
  double validity_rate = 0.0;  ///< over all rollouts
  int labeled_count = 0;
  int unlabeled_count = 0;

  bool operator==(const EvalReport&) const = default;
};

/// Most frequent present answer; ties go to the answer seen first.
std::optional<CanonicalAnswer> majority_vote(std::span<const std::optional<CanonicalAnswer>> answers);

/// True iff some prediction equals gold.
bool pass_at_k(std::span<const std::optional<CanonicalAnswer>> predictions, const CanonicalAnswer& gold);

struct OracleConfig {
  int samples = 8;
  int min_agree = 5;
  double temperature = 0.3;
  int max_tokens = 1024;
  std::uint64_t seed = 0;
};

/// The oracle's unique modal answer if at least min_agree of its samples
/// agree, else unlabeled. Evaluation only.
std::optional<CanonicalAnswer> oracle_consensus_label(const Policy& oracle, const QuestionRecord& question,
                                                      const OracleConfig& config = {});

using GoldLabels = std::map<std::string, std::optional<CanonicalAnswer>>;

GoldLabels label_split(const Policy& oracle, std::span<const QuestionRecord> split, const OracleConfig& config = {});

/// Samples the role's prompt for every question (tutors get the document),
/// grades under the configured protocol and aggregates. Questions missing
/// from `gold` or labeled empty count as unlabeled.
EvalReport evaluate_split(const PolicyParams& params, const Vocabulary& vocab, std::span<const QuestionRecord> split,
                          Role role, const EvalConfig& config, const GoldLabels& gold);

}  // namespace gates

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gates/answer.hpp"
#include "gates/tokens.hpp"

namespace gates {

/// One sampled completion and everything the gate and the losses need from it.
struct RolloutRecord {
  std::string question_id;
  Role role = Role::student;
  TokenSeq prompt_tokens;
  TokenSeq completion_tokens;
  std::string completion_text;
  std::vector<double> token_logprobs;  ///< natural log, one per completion token
  std::optional<CanonicalAnswer> extracted;
  bool ended_with_eos = false;
  bool truncated = false;
  bool leakage = false;
  bool valid = false;

  bool operator==(const RolloutRecord&) const = default;
};

struct GenerationLimits {
  int max_tokens = 512;
};

/// Sets `extracted`, `truncated` and `valid` from the completion text.
///
/// A rollout is truncated when it hit max_tokens without emitting
/// end-of-sequence. A truncated rollout stays valid if the boxed answer was
/// already closed before the cut.
void check_validity(RolloutRecord& rollout, const GenerationLimits& limits);

inline const std::vector<std::string>& default_leakage_keywords() {
  static const std::vector<std::string> kWords{"document", "passage", "text"};
  return kWords;
}

/// True iff any keyword occurs in `text` as a case-insensitive whole word.
bool detect_leakage(std::string_view text, std::span<const std::string> keywords);

struct AnswerCluster {
  CanonicalAnswer answer;
  std::vector<int> member_indices;
  int count = 0;

  bool operator==(const AnswerCluster&) const = default;
};

struct ConsensusReport {
  std::string question_id;
  std::vector<AnswerCluster> clusters;  ///< ordered by first member index
  std::optional<CanonicalAnswer> modal_answer;  ///< unique plurality answer, if any
  bool gate = false;
  bool tie = false;
  int k = 0;
  int tau = 0;

  int max_count() const;
};

/// Clusters the present answers; absent answers abstain but still count toward k.
/// The gate opens iff a unique largest cluster reaches tau. Two or more
/// clusters sharing the largest count close the gate.
ConsensusReport compute_consensus(std::span<const std::optional<CanonicalAnswer>> answers, int tau,
                                  int k, std::string question_id = {});

struct EligibilityMask {
  std::string question_id;
  std::vector<bool> e;

  int count() const;
};

/// e_j = gate && valid_j && !leakage_j && extracted_j == modal answer.
EligibilityMask compute_eligibility(const ConsensusReport& report,
                                    std::span<const RolloutRecord> rollouts);

}  // namespace gates

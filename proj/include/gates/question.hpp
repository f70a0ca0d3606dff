#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "gates/answer.hpp"

namespace gates {

enum class Provenance { synthetic, imported };

constexpr std::string_view provenance_name(Provenance p) {
  return p == Provenance::synthetic ? "synthetic" : "imported";
}

/// A document and the one question generated from it.
struct QuestionRecord {
  std::string question_id;
  std::string document;
  std::string question;
  Provenance provenance = Provenance::synthetic;
  /// Modal tutor answer seen while filtering; never a training label.
  std::optional<CanonicalAnswer> build_consensus_answer;

  bool operator==(const QuestionRecord&) const = default;
};

}  // namespace gates

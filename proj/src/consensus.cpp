#include "gates/consensus.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace gates {

void check_validity(RolloutRecord& rollout, const GenerationLimits& limits) {
  rollout.truncated = !rollout.ended_with_eos &&
                      static_cast<int>(rollout.completion_tokens.size()) >= limits.max_tokens;
  rollout.extracted.reset();
  if (auto span = extract_final_answer(rollout.completion_text)) {
    CanonicalAnswer answer = canonicalize(span->raw_span);
    if (answer.is_numeric() || !answer.symbol_text().empty()) rollout.extracted = std::move(answer);
  }
  // An unclosed box at the cut yields no extraction, so truncation before the
  // answer is already covered by the extraction check.
  rollout.valid = rollout.extracted.has_value();
}

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

}  // namespace

bool detect_leakage(std::string_view text, std::span<const std::string> keywords) {
  if (keywords.empty()) throw std::invalid_argument("detect_leakage: keyword list is empty");
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    const std::string_view word = text.substr(i, j - i);
    for (const std::string& kw : keywords) {
      if (kw.size() == word.size() &&
          std::equal(word.begin(), word.end(), kw.begin(),
                     [](char a, char b) { return lower(a) == lower(b); })) {
        return true;
      }
    }
    i = j;
  }
  return false;
}

int ConsensusReport::max_count() const {
  int best = 0;
  for (const auto& c : clusters) best = std::max(best, c.count);
  return best;
}

ConsensusReport compute_consensus(std::span<const std::optional<CanonicalAnswer>> answers, int tau,
                                  int k, std::string question_id) {
  if (static_cast<int>(answers.size()) != k)
    throw std::invalid_argument("compute_consensus: answers.size() != k");
  if (tau < 1 || tau > k) throw std::invalid_argument("compute_consensus: tau outside [1, k]");

  ConsensusReport report;
  report.question_id = std::move(question_id);
  report.k = k;
  report.tau = tau;
  for (int j = 0; j < k; ++j) {
    const auto& a = answers[static_cast<std::size_t>(j)];
    if (!a) continue;
    auto it = std::find_if(report.clusters.begin(), report.clusters.end(),
                           [&](const AnswerCluster& c) { return answers_equivalent(c.answer, *a); });
    if (it == report.clusters.end()) {
      report.clusters.push_back(AnswerCluster{*a, {j}, 1});
    } else {
      it->member_indices.push_back(j);
      ++it->count;
    }
  }

  const int best = report.max_count();
  const AnswerCluster* modal = nullptr;
  int at_best = 0;
  for (const auto& c : report.clusters) {
    if (c.count == best) {
      ++at_best;
      if (!modal) modal = &c;
    }
  }
  report.tie = at_best >= 2;
  report.gate = best >= tau && !report.tie;
  // A unique plurality is reported even below tau; only `gate` licenses its use.
  if (modal && !report.tie) report.modal_answer = modal->answer;
  return report;
}

int EligibilityMask::count() const { return static_cast<int>(std::count(e.begin(), e.end(), true)); }

EligibilityMask compute_eligibility(const ConsensusReport& report,
                                    std::span<const RolloutRecord> rollouts) {
  EligibilityMask mask;
  mask.question_id = report.question_id;
  mask.e.assign(rollouts.size(), false);
  if (!report.gate || !report.modal_answer) return mask;
  for (std::size_t j = 0; j < rollouts.size(); ++j) {
    const RolloutRecord& r = rollouts[j];
    mask.e[j] = r.valid && !r.leakage && r.extracted &&
                answers_equivalent(*r.extracted, *report.modal_answer);
  }
  return mask;
}

}  // namespace gates

#include "gates/tutor_model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "gates/answer.hpp"

namespace gates {

std::string TutorAnswerModel::label(int category) const {
  if (!labels.empty()) return labels.at(static_cast<std::size_t>(category));
  return std::to_string(category + 1);
}

void TutorAnswerModel::validate() const {
  if (probs.empty()) throw std::invalid_argument("TutorAnswerModel: no categories");
  if (!labels.empty() && labels.size() != probs.size())
    throw std::invalid_argument("TutorAnswerModel: labels and probs differ in length");
  if (correct_index < 0 || correct_index >= categories())
    throw std::invalid_argument("TutorAnswerModel: correct_index out of range");
  double total = invalid_prob;
  if (!(invalid_prob >= 0.0)) throw std::invalid_argument("TutorAnswerModel: negative invalid_prob");
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("TutorAnswerModel: bad probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("TutorAnswerModel: probabilities do not sum to 1");
  std::set<std::string> seen;
  for (int c = 0; c < categories(); ++c) {
    if (!seen.insert(canonicalize(label(c)).to_string()).second)
      throw std::invalid_argument("TutorAnswerModel: two categories share an answer");
  }
}

int sample_category(const TutorAnswerModel& model, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int c = 0; c < model.categories(); ++c) {
    acc += model.probs[static_cast<std::size_t>(c)];
    if (u < acc) return c;
  }
  // The remaining mass, including rounding slack, is abstention.
  if (model.invalid_prob > 0.0) return -1;
  for (int c = model.categories() - 1; c >= 0; --c)
    if (model.probs[static_cast<std::size_t>(c)] > 0.0) return c;
  return -1;
}

std::string render_tutor_solution(const TutorAnswerModel& model, int category, int variant) {
  if (category < 0) return "Combining the facts leaves the result unclear.";
  const std::string text = model.label(category);
  std::string form = text;
  const CanonicalAnswer canon = canonicalize(text);
  if (canon.kind() == CanonicalAnswer::Kind::integer) {
    switch (variant % 3) {
      case 1:
        form = canon.to_string() + ".0";
        break;
      case 2: {
        const BigInt twice = canon.numerator() * 2;
        form = "\\frac{" + twice.str() + "}{2}";
        break;
      }
      default:
        break;
    }
  }
  return "Combining the facts gives " + form + ".\n\\boxed{" + form + "}";
}

RolloutRecord synthetic_tutor_respond(const TutorAnswerModel& model, std::string_view question_id,
                                      std::uint64_t seed) {
  Rng rng(seed);
  return synthetic_tutor_respond(model, question_id, rng);
}

RolloutRecord synthetic_tutor_respond(const TutorAnswerModel& model, std::string_view question_id, Rng& rng) {
  const int category = sample_category(model, rng);
  const int variant = static_cast<int>(rng.below(kTutorVariants));
  return scripted_tutor_rollout(model, question_id, category, variant);
}

RolloutRecord scripted_tutor_rollout(const TutorAnswerModel& model, std::string_view question_id, int category,
                                     int variant) {
  RolloutRecord r;
  r.question_id = std::string(question_id);
  r.role = Role::tutor;
  r.completion_text = render_tutor_solution(model, category, variant);
  r.ended_with_eos = true;
  check_validity(r, GenerationLimits{});
  r.leakage = detect_leakage(r.completion_text, default_leakage_keywords());
  return r;
}

std::vector<RolloutRecord> ScriptedOracle::generate(const PromptSpec& prompt, std::string_view question_id,
                                                    const SamplingConfig& config, int count) const {
  auto it = answers_.find(std::string(question_id));
  std::vector<RolloutRecord> out(static_cast<std::size_t>(count));
  for (auto& r : out) {
    r.question_id = std::string(question_id);
    r.role = prompt.role;
    r.ended_with_eos = true;
    r.completion_text = it == answers_.end() ? "No answer." : "The answer is " + it->second + ".\n\\boxed{" + it->second + "}";
    check_validity(r, GenerationLimits{config.max_tokens});
    r.leakage = detect_leakage(r.completion_text, default_leakage_keywords());
  }
  return out;
}

}  // namespace gates

#include "gates/evaluation.hpp"

#include <algorithm>

#include "gates/consensus.hpp"
#include "gates/errors.hpp"
#include "gates/parallel.hpp"
#include "gates/rng.hpp"

namespace gates {

std::string_view eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::greedy:
      return "greedy";
    case EvalMode::maj_k:
      return "maj_k";
    case EvalMode::pass_k:
      break;
  }
  return "pass_k";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "greedy") return EvalMode::greedy;
  if (name == "maj_k" || name == "maj") return EvalMode::maj_k;
  if (name == "pass_k" || name == "pass") return EvalMode::pass_k;
  throw ConfigError("unknown eval mode '" + std::string(name) + "' (expected greedy, maj_k or pass_k)");
}

void EvalConfig::validate() const {
  if (samples < 1) throw ConfigError("eval.samples must be >= 1");
  if (temperature < 0.0) throw ConfigError("eval.temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("eval.max_tokens must be >= 1");
  if (mode == EvalMode::greedy && (samples != 1 || temperature != 0.0))
    throw ConfigError("greedy evaluation requires samples = 1 and temperature = 0");
}

std::optional<CanonicalAnswer> majority_vote(std::span<const std::optional<CanonicalAnswer>> answers) {
  if (answers.empty()) throw std::invalid_argument("majority_vote: empty prediction list");
  std::vector<std::pair<const CanonicalAnswer*, int>> tally;
  for (const auto& a : answers) {
    if (!a) continue;
    auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return answers_equivalent(*t.first, *a); });
    if (it == tally.end()) {
      tally.emplace_back(&*a, 1);
    } else {
      ++it->second;
    }
  }
  if (tally.empty()) return std::nullopt;
  // Strict comparison keeps the earliest first occurrence on ties.
  const auto* best = &tally.front();
  for (const auto& t : tally)
    if (t.second > best->second) best = &t;
  return *best->first;
}

bool pass_at_k(std::span<const std::optional<CanonicalAnswer>> predictions, const CanonicalAnswer& gold) {
  if (predictions.empty()) throw std::invalid_argument("pass_at_k: empty prediction list");
  return std::any_of(predictions.begin(), predictions.end(),
                     [&](const auto& p) { return p && answers_equivalent(*p, gold); });
}

std::optional<CanonicalAnswer> oracle_consensus_label(const Policy& oracle, const QuestionRecord& question,
                                                      const OracleConfig& config) {
  SamplingConfig sc;
  sc.temperature = config.temperature;
  sc.max_tokens = config.max_tokens;
  sc.seed = derive_seed(config.seed, hash_text(question.question_id), hash_text("oracle"));
  const auto rollouts =
      oracle.generate(PromptSpec{Role::tutor, question.document, question.question}, question.question_id, sc,
                      config.samples);
  std::vector<std::optional<CanonicalAnswer>> answers;
  for (const auto& r : rollouts) answers.push_back(r.valid ? r.extracted : std::nullopt);
  const ConsensusReport report = compute_consensus(answers, config.min_agree, config.samples, question.question_id);
  if (!report.gate) return std::nullopt;
  return report.modal_answer;
}

GoldLabels label_split(const Policy& oracle, std::span<const QuestionRecord> split, const OracleConfig& config) {
  GoldLabels gold;
  for (const auto& q : split) gold[q.question_id] = oracle_consensus_label(oracle, q, config);
  return gold;
}

EvalReport evaluate_split(const PolicyParams& params, const Vocabulary& vocab, std::span<const QuestionRecord> split,
                          Role role, const EvalConfig& config, const GoldLabels& gold) {
  config.validate();
  EvalReport report;
  report.mode = config.mode;
  report.role = role;
  report.per_question.resize(split.size());
  std::vector<int> valid(split.size(), 0);
  parallel_for(split.size(), config.workers, [&](std::size_t i) {
    const QuestionRecord& q = split[i];
    PromptSpec spec{role, std::nullopt, q.question};
    if (role == Role::tutor) spec.document = q.document;
    SamplingConfig sc;
    sc.temperature = config.temperature;
    sc.max_tokens = config.max_tokens;
    sc.seed = derive_seed(config.seed, hash_text(q.question_id), static_cast<std::uint64_t>(role));
    const TokenSeq prompt = render_prompt(spec, vocab);
    const auto rollouts = sample(params, vocab, prompt, sc, config.samples);
    QuestionVerdict& v = report.per_question[i];
    v.question_id = q.question_id;
    v.role = role;
    for (const auto& r : rollouts) {
      v.predictions.push_back(r.valid ? r.extracted : std::nullopt);
      valid[i] += r.valid ? 1 : 0;
    }
    auto g = gold.find(q.question_id);
    if (g == gold.end() || !g->second) return;
    switch (config.mode) {
      case EvalMode::greedy: {
        const auto& p = v.predictions.front();
        v.verdict = p.has_value() && answers_equivalent(*p, *g->second);
        break;
      }
      case EvalMode::maj_k: {
        const auto m = majority_vote(v.predictions);
        v.verdict = m.has_value() && answers_equivalent(*m, *g->second);
        break;
      }
      case EvalMode::pass_k:
        v.verdict = pass_at_k(v.predictions, *g->second);
        break;
    }
  });

  std::vector<std::size_t> order(split.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.per_question[a].question_id < report.per_question[b].question_id;
  });
  std::vector<QuestionVerdict> sorted;
  sorted.reserve(order.size());
  int correct = 0, total_valid = 0;
  for (std::size_t i : order) {
    sorted.push_back(std::move(report.per_question[i]));
    total_valid += valid[i];
  }
  report.per_question = std::move(sorted);
  for (const auto& v : report.per_question) {
    if (!v.verdict) {
      ++report.unlabeled_count;
      continue;
    }
    ++report.labeled_count;
    correct += *v.verdict ? 1 : 0;
  }
  report.accuracy = report.labeled_count > 0 ? static_cast<double>(correct) / report.labeled_count : 0.0;
  const auto rollouts = static_cast<double>(split.size()) * config.samples;
  report.validity_rate = rollouts > 0 ? total_valid / rollouts : 0.0;
  return report;
}

}  // namespace gates

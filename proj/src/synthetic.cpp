#include "gates/synthetic.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

#include "gates/errors.hpp"
#include "gates/losses.hpp"
#include "gates/optimizer.hpp"
#include "gates/rng.hpp"

namespace gates {

namespace {

constexpr std::array<std::string_view, 4> kOperandWords{"one", "two", "three", "four"};
constexpr int kMinValue = 1;
constexpr int kMaxValue = 9;

std::string make_name(Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::string s;
  for (int i = 0; i < 5; ++i) {
    const std::string_view pool = i % 2 == 0 ? consonants : vowels;
    s.push_back(pool[rng.below(pool.size())]);
  }
  return s;
}

std::string candidate_id(int entity, bool heldout, Operation op) {
  std::string digits = std::to_string(entity);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "e" + digits + (heldout ? "-h-" : "-t-") + std::string(operation_name(op));
}

Operation other(Operation op) { return op == Operation::plus ? Operation::times : Operation::plus; }

int random_value(Rng& rng) { return kMinValue + static_cast<int>(rng.below(kMaxValue - kMinValue + 1)); }

int random_operand(Rng& rng) { return 1 + static_cast<int>(rng.below(kOperandWords.size())); }

}  // namespace

std::string_view operation_name(Operation op) { return op == Operation::plus ? "plus" : "times"; }

int apply_operation(Operation op, int value, int operand) {
  return op == Operation::plus ? value + operand : value * operand;
}

SyntheticWorld SyntheticWorld::generate(const SyntheticConfig& config) {
  if (config.entities < 1) throw ConfigError("synthetic world needs at least one entity");
  if (config.decoys < 1 || config.decoys > kMaxValue - kMinValue)
    throw ConfigError("decoy count must be in [1, 8]");
  SyntheticWorld w;
  w.config_ = config;
  Rng rng(derive_seed(config.seed, hash_text("world")));
  std::set<std::string> used{"is", "or", "what", "plus", "times", "one", "two", "three", "four"};
  const int known = static_cast<int>(std::lround(config.known_fraction * config.entities));
  for (int i = 0; i < config.entities; ++i) {
    Entity e;
    do {
      e.name = make_name(rng);
    } while (!used.insert(e.name).second);
    e.value = random_value(rng);
    e.train_op = rng.below(2) == 0 ? Operation::plus : Operation::times;
    std::vector<int> wrong;
    for (int v = kMinValue; v <= kMaxValue; ++v)
      if (v != e.value) wrong.push_back(v);
    rng.shuffle(wrong);
    e.decoys.assign(wrong.begin(), wrong.begin() + config.decoys);
    std::sort(e.decoys.begin(), e.decoys.end());
    w.entities_.push_back(std::move(e));
    w.operands_.push_back(random_operand(rng));
    w.operands_.push_back(random_operand(rng));
  }
  std::vector<int> order(static_cast<std::size_t>(config.entities));
  for (int i = 0; i < config.entities; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  for (int i = 0; i < known; ++i) w.entities_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].known = true;
  return w;
}

std::vector<QuestionRecord> SyntheticWorld::candidates() const {
  std::vector<QuestionRecord> out;
  out.reserve(entities_.size() * 2);
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    const Entity& e = entities_[i];
    for (int f = 0; f < 2; ++f) {
      const Operation op = f == 0 ? e.train_op : other(e.train_op);
      QuestionRecord q;
      q.question_id = candidate_id(static_cast<int>(i), f == 1, op);
      q.document = fact_document(e.name, e.value);
      q.question = question_text(e.name, op, operands_[2 * i + static_cast<std::size_t>(f)]);
      q.provenance = Provenance::synthetic;
      out.push_back(std::move(q));
    }
  }
  return out;
}

std::map<std::string, std::string> SyntheticWorld::truth() const {
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    for (int f = 0; f < 2; ++f) {
      const Operation op = f == 0 ? entities_[i].train_op : other(entities_[i].train_op);
      const int answer = apply_operation(op, entities_[i].value, operands_[2 * i + static_cast<std::size_t>(f)]);
      out.emplace(candidate_id(static_cast<int>(i), f == 1, op), std::to_string(answer));
    }
  }
  return out;
}

int SyntheticWorld::entity_of(std::string_view question_id) {
  if (question_id.size() < 2 || question_id[0] != 'e') return -1;
  int value = -1;
  const char* begin = question_id.data() + 1;
  const char* end = question_id.data() + question_id.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr == end || *ptr != '-') return -1;
  return value;
}

bool SyntheticWorld::is_heldout_family(const QuestionRecord& q) {
  return q.question_id.find("-h-") != std::string::npos;
}

std::string SyntheticWorld::adversarial_document(int entity) const {
  const Entity& e = entities_.at(static_cast<std::size_t>(entity));
  return listing_document(e.name, e.decoys);
}

std::string fact_document(std::string_view name, int value) {
  return std::string(name) + " is " + std::to_string(value) + " .";
}

std::string listing_document(std::string_view name, const std::vector<int>& values) {
  std::string s = std::string(name) + " is";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) s += " or";
    s += " " + std::to_string(values[i]);
  }
  return s + " .";
}

std::string question_text(std::string_view name, Operation op, int operand) {
  if (operand < 1 || operand > static_cast<int>(kOperandWords.size()))
    throw std::invalid_argument("question_text: operand out of range");
  return "what is " + std::string(name) + " " + std::string(operation_name(op)) + " " +
         std::string(kOperandWords[static_cast<std::size_t>(operand - 1)]) + " ?";
}

std::string solution_text(std::string_view name, int value, Operation op, int operand) {
  const std::string v = std::to_string(value);
  const std::string answer = std::to_string(apply_operation(op, value, operand));
  return " " + std::string(name) + " is " + v + " . " + v + " " + std::string(operation_name(op)) + " " +
         std::to_string(operand) + " is " + answer + " . \\boxed{" + answer + "}";
}

std::vector<std::string> inject_adversarial(std::vector<QuestionRecord>& train, const SyntheticWorld& world,
                                            double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw ConfigError("adversarial fraction must be in [0, 1]");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, hash_text("adversarial")));
  rng.shuffle(order);
  const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(train.size())));
  std::vector<std::string> replaced;
  for (std::size_t i = 0; i < count; ++i) {
    QuestionRecord& q = train[order[i]];
    const int entity = SyntheticWorld::entity_of(q.question_id);
    if (entity < 0) throw DataError("cannot inject into non-synthetic question " + q.question_id);
    q.document = world.adversarial_document(entity);
    replaced.push_back(q.question_id);
  }
  std::sort(replaced.begin(), replaced.end());
  return replaced;
}

Vocabulary synthetic_vocabulary(const SyntheticWorld& world) {
  std::vector<std::string> corpus;
  corpus.push_back(render_prompt_text(PromptSpec{Role::tutor, std::string("x"), "y"}));
  for (const Entity& e : world.entities()) {
    corpus.push_back(listing_document(e.name, {1, 2}));
    for (Operation op : {Operation::plus, Operation::times})
      corpus.push_back(question_text(e.name, op, 1) + solution_text(e.name, 1, op, 1));
  }
  for (int n = 0; n <= kMaxValue * static_cast<int>(kOperandWords.size()); ++n)
    corpus.push_back(std::to_string(n) + " " + std::to_string(n));
  for (std::string_view w : kOperandWords) corpus.emplace_back(w);
  return Vocabulary::build(corpus);
}

std::vector<PretrainExample> pretraining_corpus(const SyntheticWorld& world, const Vocabulary& vocab,
                                                const PretrainConfig& config) {
  std::vector<PretrainExample> out;
  Rng rng(derive_seed(config.seed, hash_text("pretrain-corpus")));
  auto add = [&](const PromptSpec& spec, const std::string& completion) {
    PretrainExample ex;
    ex.prompt = render_prompt(spec, vocab);
    ex.completion = vocab.tokenize(completion);
    ex.completion.push_back(vocab.eos());
    out.push_back(std::move(ex));
  };
  auto random_op = [&] { return rng.below(2) == 0 ? Operation::plus : Operation::times; };

  for (const Entity& e : world.entities()) {
    for (int i = 0; i < config.tutor_per_entity; ++i) {
      const int v = random_value(rng);
      const Operation op = random_op();
      const int operand = random_operand(rng);
      add(PromptSpec{Role::tutor, fact_document(e.name, v), question_text(e.name, op, operand)},
          solution_text(e.name, v, op, operand));
    }
    for (int i = 0; i < config.listing_per_entity; ++i) {
      std::vector<int> values;
      for (int v = kMinValue; v <= kMaxValue; ++v) values.push_back(v);
      rng.shuffle(values);
      values.resize(static_cast<std::size_t>(world.config().decoys));
      std::sort(values.begin(), values.end());
      const Operation op = random_op();
      const int operand = random_operand(rng);
      // Every listed value once: the target is the uniform mixture, not one draw.
      for (int pick : values)
        add(PromptSpec{Role::tutor, listing_document(e.name, values), question_text(e.name, op, operand)},
            solution_text(e.name, pick, op, operand));
    }
    if (!e.known) continue;
    for (int i = 0; i < config.student_per_entity; ++i) {
      const Operation op = random_op();
      const int operand = random_operand(rng);
      add(PromptSpec{Role::student, std::nullopt, question_text(e.name, op, operand)},
          solution_text(e.name, e.value, op, operand));
    }
  }
  return out;
}

PolicyParams pretrain_base_model(const std::vector<PretrainExample>& corpus, const NgramShape& shape,
                                 const PretrainConfig& config) {
  if (config.batch < 1 || config.epochs < 0) throw ConfigError("pretrain batch and epochs must be positive");
  PolicyParams params = init_ngram_params<double>(shape, derive_seed(config.seed, hash_text("init")), config.init_scale);
  AdamWState opt = AdamWState::zeros_like(params);
  AdamWConfig adam;
  adam.learning_rate = config.learning_rate;
  adam.weight_decay = 0.0;
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, hash_text("pretrain-epoch"), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      TokenBatch batch;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      for (std::size_t i = start; i < end; ++i) {
        const PretrainExample& ex = corpus[order[i]];
        TokenEntry entry;
        entry.prompt = ex.prompt;
        entry.completion = ex.completion;
        entry.g = entry.e = true;
        batch.entries.push_back(std::move(entry));
      }
      LossTerm nll = off_policy_loss(batch, params, config.workers);
      if (!nll.gradient.flat().allFinite()) throw NumericalError("pretraining gradient is not finite");
      adamw_step(params, opt, nll.gradient, adam);
    }
  }
  return params;
}

}  // namespace gates

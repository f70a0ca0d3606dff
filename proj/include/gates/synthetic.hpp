#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gates/policy.hpp"
#include "gates/question.hpp"
#include "gates/vocabulary.hpp"

namespace gates {

enum class Operation { plus, times };

/// Arithmetic over private facts. Every entity has a hidden value 1..9 that
/// only its document states ("zorab is 7 ."). A question combines that value
/// with a small operand. Each entity gets one training-family question with
/// one operation and one held-out-family question with the other, so the
/// only thing a held-out answer shares with training is the fact itself.
struct SyntheticConfig {
  int entities = 220;
  double known_fraction = 0.4;  ///< facts the base student already holds
  int decoys = 5;               ///< wrong values listed by an adversarial document
  std::uint64_t seed = 0;
};

struct Entity {
  std::string name;
  int value = 0;
  bool known = false;
  std::vector<int> decoys;  ///< distinct wrong values, fixed per entity
  Operation train_op = Operation::plus;
};

std::string_view operation_name(Operation op);
int apply_operation(Operation op, int value, int operand);

class SyntheticWorld {
 public:
  static SyntheticWorld generate(const SyntheticConfig& config);

  const std::vector<Entity>& entities() const { return entities_; }
  const SyntheticConfig& config() const { return config_; }

  /// One candidate per document, two documents per entity: ids
  /// "e0042-t-plus" (training family) and "e0042-h-times" (held-out family).
  std::vector<QuestionRecord> candidates() const;
  /// Generator truth keyed by question_id.
  std::map<std::string, std::string> truth() const;
  /// Entity index encoded in a synthetic question id; -1 if not synthetic.
  static int entity_of(std::string_view question_id);
  static bool is_heldout_family(const QuestionRecord& q);

  /// Document listing only the entity's decoys.
  std::string adversarial_document(int entity) const;

 private:
  SyntheticConfig config_;
  std::vector<Entity> entities_;
  std::vector<int> operands_;  ///< per candidate, two per entity
};

std::string fact_document(std::string_view name, int value);
std::string listing_document(std::string_view name, const std::vector<int>& values);
std::string question_text(std::string_view name, Operation op, int operand);
/// " zorab is 7 . 7 plus 2 is 9 . \boxed{9}"
std::string solution_text(std::string_view name, int value, Operation op, int operand);

/// Replaces the documents of round(fraction * size) training questions with
/// adversarial listings. Every listed value is wrong and the list is the
/// same each time an entity's document is shown. Returns the replaced ids.
std::vector<std::string> inject_adversarial(std::vector<QuestionRecord>& train, const SyntheticWorld& world,
                                            double fraction, std::uint64_t seed);

/// Supervised warm start that stands in for a pretrained model.
struct PretrainConfig {
  int tutor_per_entity = 24;
  int listing_per_entity = 4;
  int student_per_entity = 24;
  int epochs = 4;
  int batch = 32;
  double learning_rate = 1e-2;
  double init_scale = 0.5;
  int workers = 1;
  std::uint64_t seed = 0;
};

struct PretrainExample {
  TokenSeq prompt;
  TokenSeq completion;  ///< ends with end-of-sequence
};

/// Closed vocabulary for everything the world, its prompts and its
/// solutions can produce.
Vocabulary synthetic_vocabulary(const SyntheticWorld& world);

/// The warm-start corpus:
///  - tutor prompts with random document values for every entity, so the
///    tutor learns to read its document;
///  - tutor prompts with listing documents, answered once with each listed
///    value;
///  - student prompts for known entities only, answered with the true value.
std::vector<PretrainExample> pretraining_corpus(const SyntheticWorld& world, const Vocabulary& vocab,
                                                const PretrainConfig& config);

/// Minibatch AdamW on token-averaged negative log-likelihood.
PolicyParams pretrain_base_model(const std::vector<PretrainExample>& corpus, const NgramShape& shape,
                                 const PretrainConfig& config);

}  // namespace gates

#include <doctest.h>

#include "gates/errors.hpp"
#include "gates/evaluation.hpp"
#include "gates/tutor_model.hpp"
#include "support.hpp"

using namespace gates;
using gates::testing::small_world;

namespace {

using Preds = std::vector<std::optional<CanonicalAnswer>>;

Preds preds(std::initializer_list<const char*> texts) {
  Preds out;
  for (const char* t : texts) out.push_back(t ? std::optional(canonicalize(t)) : std::nullopt);
  return out;
}

}  // namespace

TEST_CASE("majority vote") {
  CHECK(*majority_vote(preds({"1", "2", "2", nullptr})) == canonicalize("2"));
  CHECK(*majority_vote(preds({"3", "2", "2.0", "3"})) == canonicalize("3"));
  CHECK(*majority_vote(preds({"2", "3", "3", "2"})) == canonicalize("2"));
  CHECK_FALSE(majority_vote(preds({nullptr, nullptr})));
  CHECK(*majority_vote(preds({nullptr, "5"})) == canonicalize("5"));
  CHECK_THROWS_AS(majority_vote(Preds{}), std::invalid_argument);
}

TEST_CASE("a strict majority does not depend on order") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    Preds p = preds({"7", "7", "7", "1", "2", nullptr});
    rng.shuffle(p);
    CHECK(*majority_vote(p) == canonicalize("7"));
  }
}

TEST_CASE("pass@k is monotone") {
  const auto gold = canonicalize("4");
  Preds p = preds({"1", nullptr});
  CHECK_FALSE(pass_at_k(p, gold));
  p.push_back(canonicalize("4.0"));
  CHECK(pass_at_k(p, gold));
  p.push_back(canonicalize("9"));
  CHECK(pass_at_k(p, gold));
}

TEST_CASE("eval config") {
  CHECK_NOTHROW(EvalConfig::greedy().validate());
  CHECK_NOTHROW(EvalConfig::majority().validate());
  EvalConfig bad = EvalConfig::greedy();
  bad.samples = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_eval_mode("maj_k") == EvalMode::maj_k);
  CHECK(parse_eval_mode(eval_mode_name(EvalMode::pass_k)) == EvalMode::pass_k);
  CHECK_THROWS_AS(parse_eval_mode("best"), ConfigError);
}

TEST_CASE("oracle labels need agreement") {
  const auto& w = small_world();
  const ScriptedOracle oracle(w.world.truth());
  const auto& q = w.questions.front();
  const auto label = oracle_consensus_label(oracle, q);
  REQUIRE(label);
  CHECK(label->to_string() == w.world.truth().at(q.question_id));
  QuestionRecord stranger = q;
  stranger.question_id = "nobody";
  CHECK_FALSE(oracle_consensus_label(oracle, stranger));
}

TEST_CASE("uniform policy rarely produces a valid answer") {
  const auto& w = small_world();
  const PolicyParams uniform(w.base.shape());
  const GoldLabels gold = label_split(ScriptedOracle(w.world.truth()), w.questions);
  EvalConfig cfg = EvalConfig::majority(16);
  cfg.max_tokens = 64;
  const EvalReport r = evaluate_split(uniform, w.vocab, w.questions, Role::student, cfg, gold);
  const EvalReport trained = evaluate_split(w.base, w.vocab, w.questions, Role::student, cfg, gold);
  CHECK(r.validity_rate < 0.15);
  CHECK(trained.validity_rate > 5 * r.validity_rate);
  CHECK(r.labeled_count == static_cast<int>(w.questions.size()));
}

TEST_CASE("reports are ordered, exclude unlabeled questions and respect maj <= pass") {
  const auto& w = small_world();
  GoldLabels gold = label_split(ScriptedOracle(w.world.truth()), w.questions);
  gold.erase(w.questions[0].question_id);
  gold[w.questions[1].question_id].reset();
  EvalConfig maj = EvalConfig::majority(5);
  maj.max_tokens = 40;
  EvalConfig pass = maj;
  pass.mode = EvalMode::pass_k;
  for (Role role : {Role::student, Role::tutor}) {
    const EvalReport m = evaluate_split(w.base, w.vocab, w.questions, role, maj, gold);
    const EvalReport p = evaluate_split(w.base, w.vocab, w.questions, role, pass, gold);
    CHECK(m.unlabeled_count == 2);
    CHECK(m.labeled_count == static_cast<int>(w.questions.size()) - 2);
    CHECK(m.accuracy <= p.accuracy);
    for (std::size_t i = 1; i < m.per_question.size(); ++i)
      CHECK(m.per_question[i - 1].question_id < m.per_question[i].question_id);
    for (std::size_t i = 0; i < m.per_question.size(); ++i) {
      CHECK(m.per_question[i].predictions == p.per_question[i].predictions);
      if (m.per_question[i].verdict && *m.per_question[i].verdict) CHECK(*p.per_question[i].verdict);
    }
    maj.workers = 3;
    CHECK(evaluate_split(w.base, w.vocab, w.questions, role, maj, gold) == m);
    maj.workers = 1;
  }
}

TEST_CASE("maj@1 at temperature zero is greedy") {
  const auto& w = small_world();
  const GoldLabels gold = label_split(ScriptedOracle(w.world.truth()), w.questions);
  EvalConfig greedy = EvalConfig::greedy();
  greedy.max_tokens = 40;
  EvalConfig maj1 = greedy;
  maj1.mode = EvalMode::maj_k;
  const EvalReport a = evaluate_split(w.base, w.vocab, w.questions, Role::tutor, greedy, gold);
  const EvalReport b = evaluate_split(w.base, w.vocab, w.questions, Role::tutor, maj1, gold);
  for (std::size_t i = 0; i < a.per_question.size(); ++i) CHECK(a.per_question[i].verdict == b.per_question[i].verdict);
  CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("the document helps the warm-started tutor") {
  const auto& w = small_world();
  const GoldLabels gold = label_split(ScriptedOracle(w.world.truth()), w.questions);
  EvalConfig cfg = EvalConfig::greedy();
  cfg.max_tokens = 40;
  const double tutor = evaluate_split(w.base, w.vocab, w.questions, Role::tutor, cfg, gold).accuracy;
  const double student = evaluate_split(w.base, w.vocab, w.questions, Role::student, cfg, gold).accuracy;
  CHECK(tutor >= student);
}

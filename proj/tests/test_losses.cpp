#include <doctest.h>

#include <cmath>
#include <limits>

#include "gates/losses.hpp"
#include "support.hpp"

using namespace gates;
using gates::testing::max_fd_error;
using gates::testing::random_batch;
using gates::testing::tiny_shape;

namespace {

struct Fixture {
  PolicyParams params;
  PolicyParams ref;
  TokenBatch batch;
};

Fixture make_fixture(std::uint64_t seed, int V = 8, int entries = 6) {
  Rng rng(seed);
  Fixture f{init_ngram_params<double>(tiny_shape(V), derive_seed(seed, 1), 1.2),
            init_ngram_params<double>(tiny_shape(V), derive_seed(seed, 2), 1.2), random_batch(rng, V, entries)};
  // At least one entry in every term's numerator.
  f.batch.entries[0].g = f.batch.entries[0].e = f.batch.entries[0].r = true;
  return f;
}

bool bit_equal(const LossTerm& a, const LossTerm& b) {
  return a.value == b.value && a.tokens == b.tokens && a.gradient == b.gradient;
}

}  // namespace

TEST_CASE("loss gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Fixture f = make_fixture(seed, seed % 2 ? 8 : 16);
    REQUIRE(f.params.size() <= 200);
    CHECK(max_fd_error(f.params, off_policy_loss(f.batch, f.params).gradient,
                       [&](const PolicyParams& q) { return off_policy_loss(f.batch, q).value; }) < 1e-4);
    CHECK(max_fd_error(f.params, on_policy_loss(f.batch, f.params).gradient,
                       [&](const PolicyParams& q) { return on_policy_loss(f.batch, q).value; }) < 1e-4);
    CHECK(max_fd_error(f.params, consensus_reward_loss(f.batch, f.params).gradient,
                       [&](const PolicyParams& q) { return consensus_reward_loss(f.batch, q).value; }) < 1e-4);
    CHECK(max_fd_error(f.params, kl_to_reference(f.batch, f.params, f.ref, 0.7).gradient,
                       [&](const PolicyParams& q) { return kl_to_reference(f.batch, q, f.ref, 0.7).value; }) < 1e-4);
  }
}

TEST_CASE("uniform policy off-policy loss is ln V") {
  for (int V : {8, 16, 32}) {
    const PolicyParams p(NgramShape{V, 3, 4, 5});
    Rng rng(static_cast<std::uint64_t>(V));
    TokenBatch b = random_batch(rng, V, 5);
    for (auto& e : b.entries) e.g = e.e = true;
    const double v = off_policy_loss(b, p).value;
    CHECK(std::abs(v - std::log(V)) <= 1e-12 * std::log(V));
  }
}

TEST_CASE("kl to itself is zero and kl is nonnegative") {
  const Fixture f = make_fixture(5);
  const LossTerm self = kl_to_reference(f.batch, f.params, f.params, 1.0);
  CHECK(std::abs(self.value) <= 1e-15);
  CHECK(self.gradient.flat().norm() <= 1e-14);
  CHECK(kl_to_reference(f.batch, f.params, f.ref, 1.0).value > 0.0);
  const double b1 = kl_to_reference(f.batch, f.params, f.ref, 1.0).value;
  CHECK(kl_to_reference(f.batch, f.params, f.ref, 2.5).value == doctest::Approx(2.5 * b1).epsilon(1e-14));
}

TEST_CASE("denominators count gated completion tokens") {
  Fixture f = make_fixture(6);
  std::int64_t gated = 0, eligible = 0;
  double cons_num = 0.0, off_num = 0.0;
  for (const auto& e : f.batch.entries) {
    if (!e.g) continue;
    gated += static_cast<std::int64_t>(e.completion.size());
    double lp = 0.0;
    for (double x : score(f.params, e.prompt, e.completion)) lp += x;
    if (e.r) cons_num += lp;
    if (e.e) {
      eligible += static_cast<std::int64_t>(e.completion.size());
      off_num += lp;
    }
  }
  const LossTerm off = off_policy_loss(f.batch, f.params);
  const LossTerm cons = consensus_reward_loss(f.batch, f.params);
  CHECK(off.tokens == eligible);
  CHECK(cons.tokens == gated);
  CHECK(off.value == doctest::Approx(-off_num / static_cast<double>(eligible)).epsilon(1e-13));
  CHECK(cons.value == doctest::Approx(-cons_num / static_cast<double>(gated)).epsilon(1e-13));
}

TEST_CASE("only completion tokens are scored") {
  // The prompt conditions every term but is never a target.
  const PolicyParams p = init_ngram_params<double>(tiny_shape(8), 3, 1.0);
  TokenEntry e{"q", Role::tutor, {2, 5, 3}, {4, 6, 7, 1}, true, true, true, {}};
  TokenBatch one{{e}};
  const LossTerm full = off_policy_loss(one, p);
  const auto lp = score(p, e.prompt, e.completion);
  CHECK(full.value == doctest::Approx(-(lp[0] + lp[1] + lp[2] + lp[3]) / 4).epsilon(1e-13));
  CHECK(full.tokens == 4);
  TokenEntry longer = e;
  longer.prompt.insert(longer.prompt.begin(), {6, 6, 6, 6});
  CHECK(off_policy_loss(TokenBatch{{longer}}, p).tokens == 4);
}

TEST_CASE("ungated entries contribute nothing") {
  const Fixture f = make_fixture(7, 8, 9);
  TokenBatch padded = f.batch;
  Rng rng(99);
  TokenBatch junk = random_batch(rng, 8, 12);
  for (auto& e : junk.entries) {
    e.g = false;
    e.e = e.r = true;
    padded.entries.push_back(e);
  }
  CHECK(bit_equal(off_policy_loss(padded, f.params), off_policy_loss(f.batch, f.params)));
  CHECK(bit_equal(on_policy_loss(padded, f.params), on_policy_loss(f.batch, f.params)));
  CHECK(bit_equal(consensus_reward_loss(padded, f.params), consensus_reward_loss(f.batch, f.params)));
  CHECK(bit_equal(kl_to_reference(padded, f.params, f.ref, 1.0), kl_to_reference(f.batch, f.params, f.ref, 1.0)));
}

TEST_CASE("a batch with no gated entry has zero loss and gradient") {
  Fixture f = make_fixture(8);
  for (auto& e : f.batch.entries) e.g = false;
  const LossInputs terms{off_policy_loss(f.batch, f.params), on_policy_loss(f.batch, f.params),
                         consensus_reward_loss(f.batch, f.params), kl_to_reference(f.batch, f.params, f.ref, 1.0)};
  LossWeights w;
  w.lambda_cons = 1.0;
  const LossBreakdown total = total_loss(terms, w);
  CHECK(total.total == 0.0);
  CHECK(total.gradient.flat().isZero(0.0));
  CHECK(total.included_tutor_tokens == 0);
  CHECK(total.included_student_tokens == 0);
}

TEST_CASE("duplicating a batch leaves token-mean losses unchanged") {
  const Fixture f = make_fixture(9);
  TokenBatch twice = f.batch;
  twice.entries.insert(twice.entries.end(), f.batch.entries.begin(), f.batch.entries.end());
  CHECK(off_policy_loss(twice, f.params).value == doctest::Approx(off_policy_loss(f.batch, f.params).value).epsilon(1e-12));
  CHECK(on_policy_loss(twice, f.params).value == doctest::Approx(on_policy_loss(f.batch, f.params).value).epsilon(1e-12));
  CHECK(kl_to_reference(twice, f.params, f.ref, 1.0).value ==
        doctest::Approx(kl_to_reference(f.batch, f.params, f.ref, 1.0).value).epsilon(1e-12));

  TokenBatch single{{f.batch.entries[0]}};
  TokenBatch pair{{f.batch.entries[0], f.batch.entries[0]}};
  CHECK(std::abs(off_policy_loss(pair, f.params).value - off_policy_loss(single, f.params).value) <= 1e-12);
}

TEST_CASE("advantages are clipped log-ratios") {
  RolloutRecord r;
  r.completion_tokens = {3, 4, 5, 6};
  const std::vector<double> tutor{-0.1, -9.0, -2.0, -0.5};
  const std::vector<double> student{-3.0, -0.2, -2.5, -8.0};
  const auto a = per_token_advantage(r, tutor, student, 5.0);
  CHECK(a == std::vector<double>{tutor[0] - student[0], -5.0, tutor[2] - student[2], 5.0});
  const auto raw = per_token_advantage(r, tutor, student, std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < raw.size(); ++t) CHECK(raw[t] == tutor[t] - student[t]);
  CHECK_THROWS_AS(per_token_advantage(r, tutor, std::vector<double>{1.0}, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(per_token_advantage(r, tutor, student, 0.0), std::invalid_argument);
}

TEST_CASE("on-policy advantages are constants") {
  // The gradient is that of -sum A_t log pi / L with A held fixed, whatever
  // parameters produced A.
  const Fixture f = make_fixture(10);
  TokenBatch b = f.batch;
  std::int64_t tokens = 0;
  PolicyParams expected = f.params.zeros_like();
  for (auto& e : b.entries) {
    RolloutRecord r;
    r.completion_tokens = e.completion;
    e.weights = per_token_advantage(r, score(f.ref, e.prompt, e.completion), score(f.params, e.prompt, e.completion), 5.0);
    if (e.g) tokens += static_cast<std::int64_t>(e.completion.size());
  }
  for (const auto& e : b.entries)
    if (e.g) accumulate_logprob_grad(f.params, e.prompt, e.completion, e.weights, -1.0 / static_cast<double>(tokens), expected);
  const LossTerm on = on_policy_loss(b, f.params);
  CHECK((on.gradient.flat() - expected.flat()).norm() <= 1e-12 * (1.0 + expected.flat().norm()));
}

TEST_CASE("total loss is the weighted sum") {
  const Fixture f = make_fixture(11);
  const LossInputs terms{off_policy_loss(f.batch, f.params), on_policy_loss(f.batch, f.params),
                         consensus_reward_loss(f.batch, f.params), kl_to_reference(f.batch, f.params, f.ref, 1.0)};
  const LossWeights canonical;
  CHECK(canonical.lambda_off == 1.0);
  CHECK(canonical.lambda_on == 0.1);
  CHECK(canonical.lambda_cons == 0.0);
  CHECK(canonical.lambda_kl == 0.02);
  CHECK(canonical.clip_a == 5.0);
  CHECK(canonical.beta == 1.0);
  const LossBreakdown t = total_loss(terms, canonical);
  const double hand = 1.0 * terms.off.value + 0.1 * terms.on.value + 0.02 * terms.kl.value;
  CHECK(std::abs(t.total - hand) <= 1e-10 * std::abs(hand));
  const Eigen::VectorXd g = terms.off.gradient.flat() + 0.1 * terms.on.gradient.flat() + 0.02 * terms.kl.gradient.flat();
  CHECK((t.gradient.flat() - g).norm() <= 1e-12 * (1.0 + g.norm()));

  const LossBreakdown zero = total_loss(terms, LossWeights{0, 0, 0, 0, 1, 5});
  CHECK(zero.total == 0.0);
  CHECK(zero.gradient.flat().isZero(0.0));

  LossWeights all{0.7, 0.3, 0.4, 0.2, 1.0, 5.0};
  const auto fn = [&](const PolicyParams& q) {
    const LossInputs in{off_policy_loss(f.batch, q), on_policy_loss(f.batch, q), consensus_reward_loss(f.batch, q),
                        kl_to_reference(f.batch, q, f.ref, 1.0)};
    return total_loss(in, all).total;
  };
  CHECK(max_fd_error(f.params, total_loss(terms, all).gradient, fn) < 1e-4);
}

TEST_CASE("loss results do not depend on the worker count") {
  const Fixture f = make_fixture(12, 8, 30);
  for (int workers : {2, 3, 8}) {
    CHECK(bit_equal(off_policy_loss(f.batch, f.params, workers), off_policy_loss(f.batch, f.params, 1)));
    CHECK(bit_equal(on_policy_loss(f.batch, f.params, workers), on_policy_loss(f.batch, f.params, 1)));
    CHECK(bit_equal(kl_to_reference(f.batch, f.params, f.ref, 1.0, workers), kl_to_reference(f.batch, f.params, f.ref, 1.0, 1)));
  }
}

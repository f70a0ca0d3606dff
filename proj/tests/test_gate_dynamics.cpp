#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gates/errors.hpp"
#include "gates/gate_dynamics.hpp"
#include "gates/tutor_model.hpp"

using namespace gates;

namespace {

TutorAnswerModel model_of(std::vector<double> probs, double invalid = 0.0, int correct = 0) {
  TutorAnswerModel m;
  m.probs = std::move(probs);
  m.invalid_prob = invalid;
  m.correct_index = correct;
  m.validate();
  return m;
}

TutorAnswerModel random_model(Rng& rng, int categories) {
  std::vector<double> w(static_cast<std::size_t>(categories + 1));
  double total = 0.0;
  for (double& x : w) total += (x = rng.uniform() + 0.05);
  TutorAnswerModel m;
  for (int c = 0; c < categories; ++c) m.probs.push_back(w[static_cast<std::size_t>(c)] / total);
  double sum = 0.0;
  for (double p : m.probs) sum += p;
  m.invalid_prob = rng.below(3) == 0 ? 0.0 : 1.0 - sum;
  if (m.invalid_prob == 0.0)
    for (double& p : m.probs) p /= sum;
  m.correct_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(categories)));
  return m;
}

// Probabilities by walking every ordered sequence of outcomes.
struct BruteForce {
  double fire = 0, fire_correct = 0, tie = 0;
};

BruteForce brute_force(const TutorAnswerModel& m, int k, int tau) {
  const int C = m.categories();
  const int outcomes = C + 1;
  BruteForce out;
  std::vector<int> seq(static_cast<std::size_t>(k), 0);
  for (;;) {
    double p = 1.0;
    std::vector<int> counts(static_cast<std::size_t>(C), 0);
    for (int x : seq) {
      if (x == C) {
        p *= m.invalid_prob;
      } else {
        p *= m.probs[static_cast<std::size_t>(x)];
        ++counts[static_cast<std::size_t>(x)];
      }
    }
    const int best = *std::max_element(counts.begin(), counts.end());
    const int at_best = static_cast<int>(std::count(counts.begin(), counts.end(), best));
    const bool tie = best > 0 && at_best >= 2;
    if (tie) out.tie += p;
    if (!tie && best >= tau) {
      out.fire += p;
      if (counts[static_cast<std::size_t>(m.correct_index)] == best) out.fire_correct += p;
    }
    int i = 0;
    while (i < k && ++seq[static_cast<std::size_t>(i)] == outcomes) seq[static_cast<std::size_t>(i++)] = 0;
    if (i == k) break;
  }
  return out;
}

}  // namespace

TEST_CASE("hand cases") {
  const auto half = model_of({0.5, 0.5});
  const auto o = exact_gate_outcomes(half, 2, std::vector<int>{2}).front();
  CHECK(o.fire == Rational(1, 2));
  CHECK(o.fire_correct == Rational(1, 4));
  CHECK(o.tie == Rational(1, 2));
  const GateStats s = exact_gate_stats(half, 2, 2);
  CHECK(s.fire_prob == 0.5);
  CHECK(s.precision == 0.5);
  CHECK(s.std_error == 0.0);
  CHECK(s.method == GateMethod::exact);

  const auto sure = model_of({1.0, 0.0, 0.0});
  for (int tau = 1; tau <= 8; ++tau) {
    const GateStats e = exact_gate_stats(sure, 8, tau);
    CHECK(e.fire_prob == 1.0);
    CHECK(e.precision == 1.0);
    CHECK(e.tie_prob == 0.0);
  }
  for (std::int64_t trials : {1, 17, 1000}) {
    const GateStats mc = simulate_gate_stats(sure, 8, 8, trials, 5);
    CHECK(mc.fire_prob == 1.0);
    CHECK(mc.precision == 1.0);
    CHECK(mc.trials == trials);
  }
}

TEST_CASE("tau of one always fires without invalid answers or ties") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    auto m = random_model(rng, 2);
    const double s = m.probs[0] + m.probs[1] + m.invalid_prob;
    m.probs[0] /= s;
    m.probs[1] = 1.0 - m.probs[0];
    m.invalid_prob = 0.0;
    CHECK(exact_gate_stats(m, 3, 1).fire_prob == 1.0);
  }
}

TEST_CASE("unanimity precision has a closed form") {
  const auto m = model_of({0.5, 0.25, 0.125}, 0.125, 1);
  const int k = 5;
  const auto o = exact_gate_outcomes(m, k, std::vector<int>{k}).front();
  Rational total = 0, correct = 0;
  for (int c = 0; c < 3; ++c) {
    Rational pk = 1;
    for (int i = 0; i < k; ++i) pk *= Rational(m.probs[static_cast<std::size_t>(c)]);
    total += pk;
    if (c == m.correct_index) correct = pk;
  }
  CHECK(o.fire == total);
  CHECK(o.fire_correct / o.fire == correct / total);
}

TEST_CASE("outcomes sum to one exactly and match a brute-force walk") {
  Rng rng(12);
  for (int i = 0; i < 12; ++i) {
    const int C = 2 + static_cast<int>(rng.below(3));
    const int k = 2 + static_cast<int>(rng.below(4));
    const auto m = random_model(rng, C);
    std::vector<int> taus;
    for (int t = 1; t <= k; ++t) taus.push_back(t);
    const auto all = exact_gate_outcomes(m, k, taus);
    for (int t = 1; t <= k; ++t) {
      const auto& o = all[static_cast<std::size_t>(t - 1)];
      CHECK(o.fire + o.tie + o.none == Rational(1));
      const BruteForce b = brute_force(m, k, t);
      CHECK(std::abs(static_cast<double>(o.fire) - b.fire) <= 1e-12);
      CHECK(std::abs(static_cast<double>(o.fire_correct) - b.fire_correct) <= 1e-12);
      CHECK(std::abs(static_cast<double>(o.tie) - b.tie) <= 1e-12);
    }
  }
}

TEST_CASE("sweeps are monotone") {
  Rng rng(8);
  for (int i = 0; i < 15; ++i) {
    const auto m = random_model(rng, 2 + static_cast<int>(rng.below(4)));
    const auto rows = sweep_operating_points(m, 8, 1, 8);
    REQUIRE(rows.size() == 8);
    for (std::size_t t = 1; t < rows.size(); ++t) CHECK(rows[t].fire_prob <= rows[t - 1].fire_prob);
    CHECK(sweep_violations(m, rows).empty());
  }
}

TEST_CASE("violations are reported") {
  const auto m = model_of({0.6, 0.4});
  auto rows = sweep_operating_points(m, 4, 1, 4);
  std::swap(rows[0].fire_prob, rows[3].fire_prob);
  CHECK_FALSE(sweep_violations(m, rows).empty());
}

TEST_CASE("simulation is deterministic and agrees with enumeration") {
  const auto m = model_of({0.6, 0.2, 0.15}, 0.05);
  const std::vector<int> taus{3, 4, 5};
  const auto a = simulate_gate_sweep(m, 8, taus, 20000, 99);
  const auto b = simulate_gate_sweep(m, 8, taus, 20000, 99, 3);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(a[i].fire_prob == b[i].fire_prob);
    CHECK(a[i].precision == b[i].precision);
    CHECK(a[i].tie_prob == b[i].tie_prob);
    CHECK(a[i].method == GateMethod::monte_carlo);
    const GateStats e = exact_gate_stats(m, 8, taus[i]);
    const double sd = std::sqrt(e.fire_prob * (1 - e.fire_prob) / 20000.0);
    CHECK(std::abs(a[i].fire_prob - e.fire_prob) <= 4 * sd);
    CHECK(a[i].std_error > 0.0);
  }
  CHECK(simulate_gate_sweep(m, 8, taus, 20000, 100)[0].fire_prob != a[0].fire_prob);
}

TEST_CASE("enumeration limits") {
  const auto m = model_of({0.5, 0.5});
  CHECK_THROWS_AS(exact_gate_stats(m, 17, 4), ConfigError);
  CHECK_THROWS_AS(exact_gate_stats(m, 8, 9), ConfigError);
  CHECK_THROWS_AS(exact_gate_stats(m, 8, 0), ConfigError);
  TutorAnswerModel wide;
  wide.probs.assign(9, 1.0 / 9);
  CHECK_THROWS_AS(exact_gate_stats(wide, 4, 2), ConfigError);
}

TEST_CASE("parallel enumeration is identical") {
  Rng rng(2);
  const auto m = random_model(rng, 4);
  const std::vector<int> taus{2, 4, 6};
  const auto one = exact_gate_outcomes(m, 8, taus, 1);
  const auto many = exact_gate_outcomes(m, 8, taus, 4);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(one[i].fire == many[i].fire);
    CHECK(one[i].fire_correct == many[i].fire_correct);
    CHECK(one[i].tie == many[i].tie);
  }
}

TEST_CASE("csv output") {
  const auto m = model_of({0.7, 0.3});
  const auto rows = sweep_operating_points(m, 4, 2, 3);
  std::ostringstream out;
  write_gate_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,tau,fire_prob,precision,tie_prob,method,trials,stderr");
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    CHECK(line.starts_with("4,"));
    CHECK(line.find(",exact,") != std::string::npos);
  }
  CHECK(n == 2);
}

TEST_CASE("scripted tutor rollouts") {
  const auto sure = model_of({0.0, 1.0}, 0.0, 1);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RolloutRecord r = synthetic_tutor_respond(sure, "q", s);
    REQUIRE(r.valid);
    CHECK(*r.extracted == canonicalize("2"));
    CHECK_FALSE(r.leakage);
  }
  const auto mixed = model_of({0.3, 0.3}, 0.4);
  CHECK(synthetic_tutor_respond(mixed, "q", 7) == synthetic_tutor_respond(mixed, "q", 7));

  // Category frequencies within 3 sigma of the model.
  const auto m = model_of({0.5, 0.3, 0.15}, 0.05);
  Rng rng(31);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const RolloutRecord r = synthetic_tutor_respond(m, "q", rng);
    if (!r.valid) {
      ++counts[3];
      continue;
    }
    for (int c = 0; c < 3; ++c)
      if (*r.extracted == canonicalize(m.label(c))) ++counts[static_cast<std::size_t>(c)];
  }
  const double p[] = {0.5, 0.3, 0.15, 0.05};
  for (int c = 0; c < 4; ++c) {
    const double sd = std::sqrt(p[c] * (1 - p[c]) / n);
    CHECK(std::abs(counts[static_cast<std::size_t>(c)] / static_cast<double>(n) - p[c]) <= 3 * sd);
  }
}

TEST_CASE("tutor model validation") {
  CHECK_THROWS_AS(model_of({0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(model_of({0.5, 0.5}, 0.0, 2), std::invalid_argument);
  TutorAnswerModel dup;
  dup.probs = {0.5, 0.5};
  dup.labels = {"2", "2.0"};
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
}

TEST_CASE("sampled rollouts are the fixed rollout of the drawn category and variant") {
  const auto m = model_of({0.5, 0.3, 0.15}, 0.05);
  Rng a(77), b(77);
  for (int i = 0; i < 200; ++i) {
    const RolloutRecord r = synthetic_tutor_respond(m, "q", a);
    const int category = sample_category(m, b);
    const int variant = static_cast<int>(b.below(kTutorVariants));
    CHECK(r == scripted_tutor_rollout(m, "q", category, variant));
  }
}

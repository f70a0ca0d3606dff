#include "gates/gate_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

#include "gates/consensus.hpp"
#include "gates/errors.hpp"
#include "gates/parallel.hpp"
#include "gates/rng.hpp"

namespace gates {

namespace {

using boost::multiprecision::cpp_int;

constexpr int kSimulationBlocks = 64;

void check_taus(int k, std::span<const int> taus) {
  if (k < 1) throw ConfigError("gate k must be >= 1");
  if (taus.empty()) throw ConfigError("gate sweep needs at least one tau");
  for (int tau : taus)
    if (tau < 1 || tau > k) throw ConfigError("gate tau " + std::to_string(tau) + " outside [1, k]");
}

// p == mantissa * 2^-shift with an integer mantissa.
std::pair<cpp_int, int> exact_binary(double p) {
  if (p == 0.0) return {cpp_int(0), 0};
  int exponent = 0;
  const double m = std::frexp(p, &exponent);
  const auto mantissa = static_cast<std::int64_t>(std::ldexp(m, 53));
  return {cpp_int(mantissa), 53 - exponent};
}

struct Outcome {
  int max_count = 0;
  bool tie = false;
  bool modal_correct = false;
};

// What compute_consensus says about one count vector; the last count is the
// number of invalid rollouts.
Outcome classify(const std::vector<int>& counts, const std::vector<CanonicalAnswer>& answers,
                 const CanonicalAnswer& correct, int k) {
  std::vector<std::optional<CanonicalAnswer>> list;
  list.reserve(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < answers.size(); ++c)
    for (int j = 0; j < counts[c]; ++j) list.emplace_back(answers[c]);
  list.resize(static_cast<std::size_t>(k));
  const ConsensusReport report = compute_consensus(list, 1, k);
  Outcome o;
  o.max_count = report.max_count();
  o.tie = report.tie;
  o.modal_correct = report.modal_answer && answers_equivalent(*report.modal_answer, correct);
  return o;
}

struct Tally {
  std::vector<cpp_int> fire, fire_correct;
  cpp_int tie;
};

GateStats to_stats(const ExactGateOutcomes& o) {
  GateStats s;
  s.k = o.k;
  s.tau = o.tau;
  s.method = GateMethod::exact;
  s.fire_prob = o.fire.convert_to<double>();
  s.tie_prob = o.tie.convert_to<double>();
  if (o.fire > 0) s.precision = Rational(o.fire_correct / o.fire).convert_to<double>();
  return s;
}

double binomial_se(double p, double n) { return n > 0 ? std::sqrt(std::max(0.0, p * (1.0 - p)) / n) : 0.0; }

}  // namespace

std::string_view gate_method_name(GateMethod method) {
  return method == GateMethod::exact ? "exact" : "monte_carlo";
}

std::vector<ExactGateOutcomes> exact_gate_outcomes(const TutorAnswerModel& model, int k, std::span<const int> taus,
                                                   int workers) {
  model.validate();
  check_taus(k, taus);
  const int categories = model.categories();
  if (categories > kMaxExactCategories || k > kMaxExactRollouts)
    throw ConfigError("exact enumeration needs at most " + std::to_string(kMaxExactCategories) +
                      " categories and k <= " + std::to_string(kMaxExactRollouts));

  // Weights a_i over a common power-of-two denominator; the last part is abstention.
  const int parts = categories + 1;
  std::vector<std::pair<cpp_int, int>> binary;
  for (double p : model.probs) binary.push_back(exact_binary(p));
  binary.push_back(exact_binary(model.invalid_prob));
  int shift = 0;
  for (const auto& b : binary) shift = std::max(shift, b.second);
  std::vector<cpp_int> weight;
  cpp_int total = 0;
  for (const auto& [mantissa, s] : binary) {
    weight.push_back(mantissa << (shift - s));
    total += weight.back();
  }

  std::vector<std::vector<cpp_int>> powers(static_cast<std::size_t>(parts));
  for (int i = 0; i < parts; ++i) {
    auto& row = powers[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(k) + 1);
    row[0] = 1;
    for (int n = 1; n <= k; ++n) row[static_cast<std::size_t>(n)] = row[static_cast<std::size_t>(n) - 1] * weight[static_cast<std::size_t>(i)];
  }
  std::vector<cpp_int> factorial(static_cast<std::size_t>(k) + 1);
  factorial[0] = 1;
  for (int n = 1; n <= k; ++n) factorial[static_cast<std::size_t>(n)] = factorial[static_cast<std::size_t>(n) - 1] * n;

  std::vector<CanonicalAnswer> answers;
  for (int c = 0; c < categories; ++c) answers.push_back(canonicalize(model.label(c)));
  const CanonicalAnswer& correct = answers[static_cast<std::size_t>(model.correct_index)];

  // One slice per count of the first category; slices merge in order.
  std::vector<Tally> slices(static_cast<std::size_t>(k) + 1);
  parallel_for(slices.size(), workers, [&](std::size_t first) {
    Tally& t = slices[first];
    t.fire.assign(taus.size(), 0);
    t.fire_correct.assign(taus.size(), 0);
    std::vector<int> counts(static_cast<std::size_t>(parts), 0);
    counts[0] = static_cast<int>(first);
    auto visit = [&](auto&& self, int part, int left) -> void {
      if (part == parts - 1) {
        counts[static_cast<std::size_t>(part)] = left;
        cpp_int term = factorial[static_cast<std::size_t>(k)];
        for (int i = 0; i < parts; ++i) {
          const int n = counts[static_cast<std::size_t>(i)];
          if (n > 0 && weight[static_cast<std::size_t>(i)] == 0) return;
          term *= powers[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)];
        }
        for (int i = 0; i < parts; ++i) term /= factorial[static_cast<std::size_t>(counts[static_cast<std::size_t>(i)])];
        const Outcome o = classify(counts, answers, correct, k);
        if (o.tie) {
          t.tie += term;
          return;
        }
        for (std::size_t j = 0; j < taus.size(); ++j) {
          if (o.max_count < taus[j]) continue;
          t.fire[j] += term;
          if (o.modal_correct) t.fire_correct[j] += term;
        }
        return;
      }
      for (int n = 0; n <= left; ++n) {
        counts[static_cast<std::size_t>(part)] = n;
        self(self, part + 1, left - n);
      }
    };
    visit(visit, 1, k - static_cast<int>(first));
  });

  const cpp_int denominator = boost::multiprecision::pow(total, static_cast<unsigned>(k));
  cpp_int tie = 0;
  for (const auto& s : slices) tie += s.tie;
  std::vector<ExactGateOutcomes> out;
  for (std::size_t j = 0; j < taus.size(); ++j) {
    cpp_int fire = 0, fire_correct = 0;
    for (const auto& s : slices) {
      fire += s.fire[j];
      fire_correct += s.fire_correct[j];
    }
    ExactGateOutcomes o;
    o.k = k;
    o.tau = taus[j];
    o.fire = Rational(fire, denominator);
    o.fire_correct = Rational(fire_correct, denominator);
    o.tie = Rational(tie, denominator);
    o.none = Rational(denominator - fire - tie, denominator);
    out.push_back(std::move(o));
  }
  return out;
}

GateStats exact_gate_stats(const TutorAnswerModel& model, int k, int tau, int workers) {
  const int taus[] = {tau};
  return to_stats(exact_gate_outcomes(model, k, taus, workers).front());
}

std::vector<GateStats> simulate_gate_sweep(const TutorAnswerModel& model, int k, std::span<const int> taus,
                                           std::int64_t trials, std::uint64_t seed, int workers) {
  model.validate();
  check_taus(k, taus);
  if (trials < 1) throw ConfigError("gate simulation needs trials >= 1");
  const CanonicalAnswer correct = canonicalize(model.label(model.correct_index));
  // Rollouts depend only on (category, variant); score each distinct text once.
  std::vector<std::optional<CanonicalAnswer>> table;
  for (int c = -1; c < model.categories(); ++c) {
    for (int v = 0; v < kTutorVariants; ++v) {
      RolloutRecord r = scripted_tutor_rollout(model, "sim", c, v);
      table.push_back(r.valid && !r.leakage ? std::move(r.extracted) : std::nullopt);
    }
  }

  struct Counts {
    std::vector<std::int64_t> fire, fire_correct;
    std::int64_t tie = 0;
  };
  std::vector<Counts> blocks(kSimulationBlocks);
  parallel_for(blocks.size(), workers, [&](std::size_t b) {
    Counts& c = blocks[b];
    c.fire.assign(taus.size(), 0);
    c.fire_correct.assign(taus.size(), 0);
    const std::int64_t begin = trials * static_cast<std::int64_t>(b) / kSimulationBlocks;
    const std::int64_t end = trials * static_cast<std::int64_t>(b + 1) / kSimulationBlocks;
    Rng rng(derive_seed(seed, hash_text("gate-sim"), b));
    std::vector<std::optional<CanonicalAnswer>> answers(static_cast<std::size_t>(k));
    for (std::int64_t trial = begin; trial < end; ++trial) {
      for (auto& a : answers) {
        const int category = sample_category(model, rng);
        const int variant = static_cast<int>(rng.below(kTutorVariants));
        a = table[static_cast<std::size_t>((category + 1) * kTutorVariants + variant)];
      }
      const ConsensusReport report = compute_consensus(answers, 1, k);
      if (report.tie) {
        ++c.tie;
        continue;
      }
      const int best = report.max_count();
      const bool is_correct = report.modal_answer && answers_equivalent(*report.modal_answer, correct);
      for (std::size_t j = 0; j < taus.size(); ++j) {
        if (best < taus[j]) continue;
        ++c.fire[j];
        if (is_correct) ++c.fire_correct[j];
      }
    }
  });

  std::int64_t tie = 0;
  for (const auto& c : blocks) tie += c.tie;
  const auto n = static_cast<double>(trials);
  std::vector<GateStats> out;
  for (std::size_t j = 0; j < taus.size(); ++j) {
    std::int64_t fire = 0, fire_correct = 0;
    for (const auto& c : blocks) {
      fire += c.fire[j];
      fire_correct += c.fire_correct[j];
    }
    GateStats s;
    s.k = k;
    s.tau = taus[j];
    s.method = GateMethod::monte_carlo;
    s.trials = trials;
    s.fire_prob = static_cast<double>(fire) / n;
    s.tie_prob = static_cast<double>(tie) / n;
    s.precision = fire > 0 ? static_cast<double>(fire_correct) / static_cast<double>(fire) : 0.0;
    s.std_error = binomial_se(s.fire_prob, n);
    s.tie_std_error = binomial_se(s.tie_prob, n);
    s.precision_std_error = binomial_se(s.precision, static_cast<double>(fire));
    out.push_back(s);
  }
  return out;
}

GateStats simulate_gate_stats(const TutorAnswerModel& model, int k, int tau, std::int64_t trials,
                              std::uint64_t seed, int workers) {
  const int taus[] = {tau};
  return simulate_gate_sweep(model, k, taus, trials, seed, workers).front();
}

std::vector<GateStats> sweep_operating_points(const TutorAnswerModel& model, int k, int tau_min, int tau_max,
                                              int workers) {
  if (tau_min > tau_max) throw ConfigError("gate sweep: tau_min > tau_max");
  std::vector<int> taus;
  for (int t = tau_min; t <= tau_max; ++t) taus.push_back(t);
  std::vector<GateStats> rows;
  for (const auto& o : exact_gate_outcomes(model, k, taus, workers)) rows.push_back(to_stats(o));
  return rows;
}

std::vector<std::string> sweep_violations(const TutorAnswerModel& model, std::span<const GateStats> rows) {
  const double top = *std::max_element(model.probs.begin(), model.probs.end());
  const bool unique_top = std::count(model.probs.begin(), model.probs.end(), top) == 1 &&
                          model.probs[static_cast<std::size_t>(model.correct_index)] == top;
  std::vector<std::string> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const GateStats& a = rows[i - 1];
    const GateStats& b = rows[i];
    const std::string where = "tau " + std::to_string(a.tau) + " -> " + std::to_string(b.tau);
    if (b.fire_prob > a.fire_prob) out.push_back(where + ": fire_prob increases");
    if (unique_top && a.fire_prob > 0.0 && b.fire_prob > 0.0 && b.precision < a.precision)
      out.push_back(where + ": precision decreases");
  }
  return out;
}

void write_gate_csv(std::ostream& out, std::span<const GateStats> rows) {
  const auto flags = out.flags();
  const auto precision = out.precision(12);
  out << "k,tau,fire_prob,precision,tie_prob,method,trials,stderr\n";
  for (const GateStats& r : rows) {
    out << r.k << ',' << r.tau << ',' << r.fire_prob << ',' << r.precision << ',' << r.tie_prob << ','
        << gate_method_name(r.method) << ',' << r.trials << ',' << r.std_error << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace gates

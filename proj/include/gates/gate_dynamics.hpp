#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gates/tutor_model.hpp"

namespace gates {

using Rational = boost::multiprecision::cpp_rational;

enum class GateMethod { exact, monte_carlo };

std::string_view gate_method_name(GateMethod method);

struct GateStats {
  int k = 0;
  int tau = 0;
  double fire_prob = 0.0;
  double precision = 0.0;  ///< P(modal correct | fire); 0 when the gate never fires
  double tie_prob = 0.0;
  GateMethod method = GateMethod::exact;
  std::int64_t trials = 0;        ///< Monte Carlo only
  double std_error = 0.0;         ///< of fire_prob; 0 for exact
  double precision_std_error = 0.0;
  double tie_std_error = 0.0;

  double coverage() const { return fire_prob; }
};

/// Probabilities of the three disjoint gate outcomes, as exact rationals.
/// fire + tie + none == 1 exactly.
struct ExactGateOutcomes {
  int k = 0;
  int tau = 0;
  Rational fire;
  Rational fire_correct;
  Rational tie;
  Rational none;
};

inline constexpr int kMaxExactCategories = 8;
inline constexpr int kMaxExactRollouts = 16;

/// Enumerates every count vector over the categories plus the invalid
/// outcome and applies compute_consensus to a representative answer list.
/// Probabilities are the model's doubles taken exactly, renormalized by
/// their exact sum. One result per entry of `taus`.
/// Throws ConfigError when C > 8 or k > 16, or a tau lies outside [1, k].
std::vector<ExactGateOutcomes> exact_gate_outcomes(const TutorAnswerModel& model, int k, std::span<const int> taus,
                                                   int workers = 1);

GateStats exact_gate_stats(const TutorAnswerModel& model, int k, int tau, int workers = 1);

/// Monte Carlo through the full text pipeline: rendered tutor solutions,
/// extraction, canonicalization and compute_consensus. Every tau is read
/// off the same simulated trials. Trials are split into fixed blocks with
/// their own derived streams, so results do not depend on `workers`.
std::vector<GateStats> simulate_gate_sweep(const TutorAnswerModel& model, int k, std::span<const int> taus,
                                           std::int64_t trials, std::uint64_t seed, int workers = 1);

GateStats simulate_gate_stats(const TutorAnswerModel& model, int k, int tau, std::int64_t trials,
                              std::uint64_t seed, int workers = 1);

/// Exact stats for every tau in [tau_min, tau_max].
std::vector<GateStats> sweep_operating_points(const TutorAnswerModel& model, int k, int tau_min, int tau_max,
                                              int workers = 1);

/// Rows (ordered by tau) where fire_prob increases with tau, or where
/// precision decreases with tau although the model has a unique most likely
/// category. Empty when the sweep is monotone.
std::vector<std::string> sweep_violations(const TutorAnswerModel& model, std::span<const GateStats> rows);

/// Header: k,tau,fire_prob,precision,tie_prob,method,trials,stderr
void write_gate_csv(std::ostream& out, std::span<const GateStats> rows);

}  // namespace gates

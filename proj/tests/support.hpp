#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "gates/losses.hpp"
#include "gates/ngram_model.hpp"
#include "gates/policy.hpp"
#include "gates/rng.hpp"
#include "gates/synthetic.hpp"
#include "gates/vocabulary.hpp"

namespace gates::testing {

/// Vocabulary of exactly `size` pieces (size >= 5): the required specials
/// followed by single letters.
inline Vocabulary tiny_vocabulary(int size) {
  std::vector<std::string> pieces{"<pad>", "<eos>", "Solution:", "\\boxed{", "}"};
  for (int i = 0; static_cast<int>(pieces.size()) < size; ++i) {
    std::string p(1, static_cast<char>('a' + i % 26));
    if (i >= 26) p += std::to_string(i / 26);
    pieces.push_back(p);
  }
  return Vocabulary(std::move(pieces));
}

/// At most 200 parameters for V <= 16.
inline NgramShape tiny_shape(int vocab) {
  return vocab <= 8 ? NgramShape{vocab, 2, 3, 4} : NgramShape{vocab, 2, 2, 3};
}

inline TokenSeq random_tokens(Rng& rng, int vocab, int length) {
  TokenSeq out(static_cast<std::size_t>(length));
  for (auto& t : out) t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab)));
  return out;
}

/// Mixed-role batch with random bits and advantages.
inline TokenBatch random_batch(Rng& rng, int vocab, int entries) {
  TokenBatch b;
  for (int i = 0; i < entries; ++i) {
    TokenEntry e;
    e.question_id = "q" + std::to_string(i);
    e.role = i % 2 == 0 ? Role::tutor : Role::student;
    e.prompt = random_tokens(rng, vocab, 2 + static_cast<int>(rng.below(5)));
    e.completion = random_tokens(rng, vocab, 1 + static_cast<int>(rng.below(6)));
    for (std::size_t t = 0; t < e.completion.size(); ++t) e.weights.push_back(10.0 * rng.uniform() - 5.0);
    e.g = rng.uniform() < 0.8;
    e.e = rng.uniform() < 0.6;
    e.r = rng.uniform() < 0.5;
    b.entries.push_back(std::move(e));
  }
  return b;
}

/// Answer string together with an independent equivalence key: "n:p/q" in
/// lowest terms for numbers, "s:text" for symbols.
struct AnswerSample {
  std::string text;
  std::string key;
};

inline AnswerSample random_answer(Rng& rng) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng.below(n)); };
  auto decorate = [&](std::string s) {
    switch (pick(6)) {
      case 0: return " " + s + "  ";
      case 1: return "$" + s + "$";
      case 2: return s + ".";
      case 3: return "$ " + s + " $,";
      default: return s;
    }
  };
  if (pick(4) == 0) {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> kSymbols{
        {"x+1", {"x+1", " x+1", "x+1 "}},
        {"1+x", {"1+x"}},
        {"a b", {"a b", "a  b", "a \t b"}},
        {"\\sqrt{2}", {"\\sqrt{2}"}},
        {"\\pi", {"\\pi"}},
        {"1/0", {"1/0"}},
        {"\\frac{3}{0}", {"\\frac{3}{0}"}},
        {"2.5.1", {"2.5.1"}},
    };
    const auto& [key, forms] = kSymbols[pick(kSymbols.size())];
    return {decorate(forms[pick(forms.size())]), "s:" + key};
  }
  static const std::int64_t kDens[] = {1, 1, 1, 2, 3, 4, 5, 8, 10};
  const std::int64_t den0 = kDens[pick(std::size(kDens))];
  const std::int64_t num0 = static_cast<std::int64_t>(pick(41)) - 20;
  const std::int64_t g = std::gcd(num0 == 0 ? den0 : std::abs(num0), den0);
  const std::int64_t num = num0 / g, den = num0 == 0 ? 1 : den0 / g;
  const std::string key = "n:" + std::to_string(num) + "/" + std::to_string(den);
  const bool neg = num < 0;
  const std::int64_t a = std::abs(num);
  const std::string sign = neg ? "-" : (pick(5) == 0 ? "+" : "");
  const std::int64_t scale = 1 + static_cast<std::int64_t>(pick(3));
  std::vector<std::string> forms;
  forms.push_back(sign + "\\frac{" + std::to_string(a * scale) + "}{" + std::to_string(den * scale) + "}");
  forms.push_back(sign + std::to_string(a * scale) + "/" + std::to_string(den * scale));
  if (neg) forms.push_back("\\frac{-" + std::to_string(a) + "}{" + std::to_string(den) + "}");
  if (den == 1) {
    forms.push_back(sign + std::to_string(a));
    forms.push_back(sign + std::to_string(a) + ".0");
    forms.push_back(sign + std::to_string(a) + "." + std::string(1 + pick(3), '0'));
    forms.push_back(sign + std::to_string(a * 100) + "%");
  }
  // Terminating decimals: denominators whose only factors are 2 and 5.
  std::int64_t d = den, twos = 0, fives = 0;
  while (d % 2 == 0) d /= 2, ++twos;
  while (d % 5 == 0) d /= 5, ++fives;
  if (d == 1 && den > 1) {
    const std::int64_t places = std::max(twos, fives);
    std::int64_t p10 = 1;
    for (std::int64_t i = 0; i < places; ++i) p10 *= 10;
    const std::int64_t scaled = a * (p10 / den);
    std::string digits = std::to_string(scaled);
    if (static_cast<std::int64_t>(digits.size()) <= places)
      digits = std::string(static_cast<std::size_t>(places + 1 - static_cast<std::int64_t>(digits.size())), '0') + digits;
    const std::string whole = digits.substr(0, digits.size() - static_cast<std::size_t>(places));
    const std::string frac = digits.substr(digits.size() - static_cast<std::size_t>(places));
    forms.push_back(sign + whole + "." + frac);
    forms.push_back(sign + whole + "." + frac + "0");
    if (whole == "0") forms.push_back(sign + "." + frac);
  }
  return {decorate(forms[pick(forms.size())]), key};
}

/// Text with zero or more boxed answers around noise, and the contents the
/// last-marker rule must return (empty when absent).
struct BoxedSample {
  std::string text;
  std::optional<std::string> expected;
  std::size_t offset = 0;
};

inline BoxedSample random_boxed_text(Rng& rng) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng.below(n)); };
  static const std::vector<std::string> kNoise{"so ", "x = ", "then } ", "{a} ", "we get ", "\n", "box{", "answer: "};
  std::function<std::string(int)> balanced = [&](int depth) {
    std::string s;
    const std::size_t parts = 1 + pick(3);
    for (std::size_t i = 0; i < parts; ++i) {
      if (depth < 3 && pick(4) == 0) {
        s += "{" + balanced(depth + 1) + "}";
      } else if (pick(6) == 0) {
        s += "\\frac{" + std::to_string(pick(9)) + "}{" + std::to_string(1 + pick(9)) + "}";
      } else {
        s += std::to_string(pick(100));
        if (pick(3) == 0) s += " + y";
      }
    }
    return s;
  };
  BoxedSample out;
  const std::size_t boxes = pick(4);
  for (std::size_t b = 0; b < boxes; ++b) {
    for (std::size_t i = pick(3); i > 0; --i) out.text += kNoise[pick(kNoise.size())];
    const std::string inner = balanced(0);
    out.offset = out.text.size();
    out.text += "\\boxed{" + inner + "}";
    out.expected = inner;
  }
  if (boxes > 0 && pick(5) == 0) {
    // A final marker that never closes hides every earlier box.
    out.text += " \\boxed{" + std::to_string(pick(10)) + "{";
    out.expected.reset();
  }
  static const std::vector<std::string> kTail{"done", ".", "\n", "so that is it"};
  for (std::size_t i = pick(3); i > 0; --i) out.text += " " + kTail[pick(kTail.size())];
  return out;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Largest component-wise relative error between `analytic` and central
/// differences of `f` at `params`.
template <typename F>
double max_fd_error(const PolicyParams& params, const PolicyParams& analytic, F&& f, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    PolicyParams up = params, down = params;
    up.flat()[i] += h;
    down.flat()[i] -= h;
    const double numeric = (f(up) - f(down)) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic.flat()[i], numeric));
  }
  return worst;
}

struct SmallWorld {
  SyntheticWorld world;
  Vocabulary vocab;
  PolicyParams base;
  std::vector<QuestionRecord> questions;
};

/// Twelve entities and a warm-started model, built once per process. Some
/// tutor groups agree and some do not.
inline const SmallWorld& small_world() {
  static const SmallWorld w = [] {
    SmallWorld s;
    s.world = SyntheticWorld::generate(SyntheticConfig{12, 0.5, 5, 4});
    s.vocab = synthetic_vocabulary(s.world);
    PretrainConfig pc;
    pc.seed = 4;
    s.base = pretrain_base_model(pretraining_corpus(s.world, s.vocab, pc), NgramShape{s.vocab.size(), 4, 8, 16}, pc);
    s.questions = s.world.candidates();
    return s;
  }();
  return w;
}

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("gates-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace gates::testing

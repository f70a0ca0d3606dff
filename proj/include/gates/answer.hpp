#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace gates {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

/// Contents of the last \boxed{...} in a completion.
struct ExtractedAnswer {
  std::string raw_span;
  std::size_t source_offset = 0;  ///< index of the backslash of the marker

  bool operator==(const ExtractedAnswer&) const = default;
};

inline constexpr std::string_view kBoxedMarker = "\\boxed{";

/// Returns the balanced contents of the last boxed marker, or nullopt when no
/// marker exists or its braces never close.
std::optional<ExtractedAnswer> extract_final_answer(std::string_view text);

/// Equivalence key for final answers.
///
/// Numbers are held as exact rationals: every finite decimal or percentage
/// reduces to an integer or a rational in lowest terms, so there is no
/// separate decimal kind. Anything that is not a number is kept as
/// normalized text and compared literally.
class CanonicalAnswer {
 public:
  enum class Kind { integer, rational, symbol };

  static CanonicalAnswer from_integer(BigInt value);
  static CanonicalAnswer from_rational(const BigRational& value);
  static CanonicalAnswer from_symbol(std::string text);

  Kind kind() const { return kind_; }
  bool is_numeric() const { return kind_ != Kind::symbol; }
  /// Numerator (integer and rational kinds).
  const BigInt& numerator() const { return numerator_; }
  /// Positive denominator; 1 for integers.
  const BigInt& denominator() const { return denominator_; }
  const std::string& symbol_text() const { return symbol_; }

  /// "7", "-1/2", or the symbol text. Parsing this string with
  /// canonicalize() gives back an equal value.
  std::string to_string() const;

  bool operator==(const CanonicalAnswer& other) const = default;

 private:
  Kind kind_ = Kind::symbol;
  BigInt numerator_ = 0;
  BigInt denominator_ = 1;
  std::string symbol_;
};

std::string_view kind_name(CanonicalAnswer::Kind kind);

/// Parses sign, integer, p/q, \frac{p}{q}, decimal and percent forms; falls
/// back to normalized symbol text. A zero denominator yields a symbol.
CanonicalAnswer canonicalize(std::string_view span);

/// Whitespace collapse, surrounding dollar signs and trailing punctuation removed.
std::string normalize_symbol_text(std::string_view text);

inline bool answers_equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  return a == b;
}

}  // namespace gates

#include "gates/answer.hpp"

#include <cctype>
#include <cstdint>

namespace gates {

std::optional<ExtractedAnswer> extract_final_answer(std::string_view text) {
  const std::size_t marker = text.rfind(kBoxedMarker);
  if (marker == std::string_view::npos) return std::nullopt;
  const std::size_t begin = marker + kBoxedMarker.size();
  int depth = 1;
  for (std::size_t i = begin; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      if (--depth == 0) {
        return ExtractedAnswer{std::string(text.substr(begin, i - begin)), marker};
      }
    }
  }
  return std::nullopt;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_digit(c)) return false;
  return true;
}

BigInt parse_digits(std::string_view digits) {
  if (digits.size() <= 18) {
    std::int64_t v = 0;
    for (char c : digits) v = v * 10 + (c - '0');
    return BigInt(v);
  }
  BigInt v = 0;
  for (char c : digits) v = v * 10 + (c - '0');
  return v;
}

BigInt pow10(std::size_t n) {
  BigInt v = 1;
  for (std::size_t i = 0; i < n; ++i) v *= 10;
  return v;
}

// Optionally signed integer, e.g. the parts of \frac{p}{q}.
std::optional<BigInt> parse_signed_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) return std::nullopt;
  BigInt v = parse_digits(s);
  return negative ? BigInt(-v) : v;
}

struct NumericParse {
  enum class Status { not_numeric, number, zero_denominator } status = Status::not_numeric;
  BigInt numerator = 0;
  BigInt denominator = 1;
};

// Unsigned decimal "12", "12.5", ".5", "5." with an optional percent suffix.
NumericParse parse_unsigned_decimal(std::string_view s) {
  NumericParse out;
  bool percent = false;
  if (s.size() >= 2 && s.substr(s.size() - 2) == "\\%") {
    percent = true;
    s.remove_suffix(2);
  } else if (!s.empty() && s.back() == '%') {
    percent = true;
    s.remove_suffix(1);
  }
  const std::size_t dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() && frac.empty()) return out;
  if (!whole.empty() && !all_digits(whole)) return out;
  if (!frac.empty() && !all_digits(frac)) return out;
  std::string digits;
  digits.reserve(whole.size() + frac.size());
  digits.append(whole);
  digits.append(frac);
  out.status = NumericParse::Status::number;
  out.numerator = parse_digits(digits);
  out.denominator = frac.empty() ? BigInt(1) : pow10(frac.size());
  if (percent) out.denominator *= 100;
  return out;
}

NumericParse parse_numeric(std::string_view s) {
  NumericParse out;
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return out;

  constexpr std::string_view kFrac = "\\frac{";
  if (s.substr(0, kFrac.size()) == kFrac) {
    // \frac{p}{q} with integer p, q and nothing after the closing brace.
    std::string_view rest = s.substr(kFrac.size());
    const std::size_t close = rest.find('}');
    if (close == std::string_view::npos) return out;
    std::string_view p = rest.substr(0, close);
    rest.remove_prefix(close + 1);
    if (rest.size() < 2 || rest.front() != '{' || rest.back() != '}') return out;
    std::string_view q = rest.substr(1, rest.size() - 2);
    auto pn = parse_signed_integer(p);
    auto qn = parse_signed_integer(q);
    if (!pn || !qn) return out;
    if (*qn == 0) {
      out.status = NumericParse::Status::zero_denominator;
      return out;
    }
    out.status = NumericParse::Status::number;
    out.numerator = negative ? BigInt(-*pn) : *pn;
    out.denominator = *qn;
    return out;
  }

  const std::size_t slash = s.find('/');
  if (slash != std::string_view::npos) {
    std::string_view p = s.substr(0, slash);
    std::string_view q = s.substr(slash + 1);
    if (!all_digits(p) || !all_digits(q)) return out;
    BigInt qn = parse_digits(q);
    if (qn == 0) {
      out.status = NumericParse::Status::zero_denominator;
      return out;
    }
    out.status = NumericParse::Status::number;
    out.numerator = parse_digits(p);
    if (negative) out.numerator = -out.numerator;
    out.denominator = qn;
    return out;
  }

  out = parse_unsigned_decimal(s);
  if (negative) out.numerator = -out.numerator;
  return out;
}

}  // namespace

std::string normalize_symbol_text(std::string_view text) {
  std::string_view s = trim(text);
  auto trailing_punct = [](char c) { return c == '.' || c == ',' || c == ';' || c == ':' || c == '!'; };
  for (std::size_t before = std::string_view::npos; before != s.size();) {
    before = s.size();
    while (!s.empty() && (trailing_punct(s.back()) || is_space(s.back()))) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = trim(s.substr(1, s.size() - 2));
  }

  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

CanonicalAnswer CanonicalAnswer::from_rational(const BigRational& value) {
  CanonicalAnswer a;
  a.numerator_ = boost::multiprecision::numerator(value);
  a.denominator_ = boost::multiprecision::denominator(value);
  a.kind_ = a.denominator_ == 1 ? Kind::integer : Kind::rational;
  return a;
}

CanonicalAnswer CanonicalAnswer::from_integer(BigInt value) {
  CanonicalAnswer a;
  a.kind_ = Kind::integer;
  a.numerator_ = std::move(value);
  return a;
}

CanonicalAnswer CanonicalAnswer::from_symbol(std::string text) {
  CanonicalAnswer a;
  a.kind_ = Kind::symbol;
  a.symbol_ = std::move(text);
  return a;
}

std::string CanonicalAnswer::to_string() const {
  switch (kind_) {
    case Kind::integer:
      return numerator_.str();
    case Kind::rational:
      return numerator_.str() + "/" + denominator_.str();
    case Kind::symbol:
      break;
  }
  return symbol_;
}

std::string_view kind_name(CanonicalAnswer::Kind kind) {
  switch (kind) {
    case CanonicalAnswer::Kind::integer:
      return "integer";
    case CanonicalAnswer::Kind::rational:
      return "rational";
    case CanonicalAnswer::Kind::symbol:
      break;
  }
  return "symbol";
}

CanonicalAnswer canonicalize(std::string_view span) {
  std::string normalized = normalize_symbol_text(span);

  std::string compact;
  compact.reserve(normalized.size());
  for (char c : normalized)
    if (c != ' ') compact.push_back(c);

  // Fast path: plain integers are by far the most common answer.
  {
    std::string_view s = compact;
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      negative = s.front() == '-';
      s.remove_prefix(1);
    }
    if (all_digits(s)) {
      BigInt v = parse_digits(s);
      return CanonicalAnswer::from_integer(negative ? BigInt(-v) : std::move(v));
    }
  }

  NumericParse parsed = parse_numeric(compact);
  if (parsed.status == NumericParse::Status::number) {
    return CanonicalAnswer::from_rational(BigRational(parsed.numerator, parsed.denominator));
  }
  return CanonicalAnswer::from_symbol(std::move(normalized));
}

}  // namespace gates

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gates/tokens.hpp"

namespace gates {

/// Closed vocabulary of text pieces with greedy longest-match tokenization.
///
/// Ids are dense in [0, size). Padding and end-of-sequence are ids 0 and 1
/// and have no surface text. "\boxed{", "}" and "Solution:" are atomic
/// pieces, so answer extraction and the prompt boundary survive a
/// tokenize/detokenize round trip.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "<pad>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kSolution = "Solution:";

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> pieces);

  /// Required pieces plus every word (with and without a leading space) and
  /// every character that occurs in `corpus`.
  static Vocabulary build(std::span<const std::string> corpus);

  int size() const { return static_cast<int>(pieces_.size()); }
  TokenId pad() const { return kPadToken; }
  TokenId eos() const { return kEosToken; }
  TokenId solution() const { return solution_; }
  TokenId boxed_open() const { return boxed_open_; }
  TokenId brace_close() const { return brace_close_; }

  const std::string& piece(TokenId id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  /// -1 when absent.
  TokenId find(std::string_view piece) const;
  bool contains(std::string_view piece) const { return find(piece) >= 0; }

  /// Throws DataError if some character is not covered.
  TokenSeq tokenize(std::string_view text) const;
  /// Special tokens render as nothing.
  std::string detokenize(std::span<const TokenId> tokens) const;

  bool operator==(const Vocabulary& other) const { return pieces_ == other.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t max_piece_length_ = 1;
  TokenId solution_ = -1;
  TokenId boxed_open_ = -1;
  TokenId brace_close_ = -1;
};

}  // namespace gates

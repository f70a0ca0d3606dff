#include "gates/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "gates/answer.hpp"
#include "gates/errors.hpp"

namespace gates {

Vocabulary::Vocabulary(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.size() < 2 || pieces_[0] != kPad || pieces_[1] != kEos)
    throw DataError("vocabulary must start with <pad>, <eos>");
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    auto [it, inserted] = index_.emplace(pieces_[i], static_cast<TokenId>(i));
    if (!inserted) throw DataError("duplicate vocabulary piece: '" + pieces_[i] + "'");
    if (i >= 2) max_piece_length_ = std::max(max_piece_length_, pieces_[i].size());
  }
  solution_ = find(kSolution);
  boxed_open_ = find(kBoxedMarker);
  brace_close_ = find("}");
  if (solution_ < 0 || boxed_open_ < 0 || brace_close_ < 0)
    throw DataError("vocabulary lacks one of 'Solution:', '\\boxed{', '}'");
}

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  std::set<std::string> found;
  for (char c = '0'; c <= '9'; ++c) found.insert(std::string(1, c));
  for (char c = 'a'; c <= 'z'; ++c) found.insert(std::string(1, c));
  found.insert(" ");
  found.insert("\n");
  found.insert(std::string(kBoxedMarker));
  found.insert("}");
  found.insert(std::string(kSolution));

  for (const std::string& text : corpus) {
    std::string_view s = text;
    std::size_t i = 0;
    while (i < s.size()) {
      if (s.substr(i, kBoxedMarker.size()) == kBoxedMarker) {
        i += kBoxedMarker.size();
        continue;
      }
      const char c = s[i];
      found.insert(std::string(1, c));
      if (!word_char(c)) {
        if (c != ' ' && c != '\n' && c != '\\') {
          found.insert(std::string(1, c));
          found.insert(" " + std::string(1, c));
        }
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < s.size() && word_char(s[j])) ++j;
      std::string word(s.substr(i, j - i));
      // "Question:" and friends stay one piece, like "Solution:".
      if (j < s.size() && s[j] == ':' && std::isupper(static_cast<unsigned char>(word[0]))) {
        word.push_back(':');
        ++j;
      }
      found.insert(word);
      found.insert(" " + word);
      i = j;
    }
  }

  std::vector<std::string> pieces{std::string(kPad), std::string(kEos)};
  pieces.insert(pieces.end(), found.begin(), found.end());
  return Vocabulary(std::move(pieces));
}

TokenId Vocabulary::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? -1 : it->second;
}

TokenSeq Vocabulary::tokenize(std::string_view text) const {
  TokenSeq out;
  out.reserve(text.size() / 3 + 1);
  std::string probe;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t longest = std::min(max_piece_length_, text.size() - i);
    TokenId match = -1;
    std::size_t match_len = 0;
    for (std::size_t len = longest; len >= 1; --len) {
      probe.assign(text.substr(i, len));
      auto it = index_.find(probe);
      if (it != index_.end() && it->second >= 2) {
        match = it->second;
        match_len = len;
        break;
      }
    }
    if (match < 0) {
      throw DataError("character '" + std::string(1, text[i]) + "' at offset " + std::to_string(i) +
                      " is not in the vocabulary");
    }
    out.push_back(match);
    i += match_len;
  }
  return out;
}

std::string Vocabulary::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t == pad() || t == eos()) continue;
    out += piece(t);
  }
  return out;
}

}  // namespace gates

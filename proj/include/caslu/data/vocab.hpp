#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "caslu/data/text.hpp"

namespace caslu::data {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kSepToken = "<sep>";

// Token -> id map; ids 0, 1, 2 are PAD, UNK and SEP.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSep = 2;
  static constexpr int kReserved = 3;

  Vocab();
  // Rebuilds from a full token list (reserved tokens first), e.g. from a
  // checkpoint header.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  std::vector<int> encode(const Tokens& tokens) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  void push(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Ids after the reserved ones in order of decreasing count, ties broken
// lexicographically. Tokens seen fewer than `min_count` times are left out
// and encode as UNK.
Vocab build_vocab(const std::vector<Tokens>& sequences, std::size_t min_count = 1);

}  // namespace caslu::data

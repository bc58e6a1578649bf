#include "caslu/data/vocab.hpp"

#include <algorithm>
#include <map>

#include "caslu/util/error.hpp"

namespace caslu::data {

Vocab::Vocab() {
  push(kPadToken);
  push(kUnkToken);
  push(kSepToken);
}

void Vocab::push(const std::string& token) {
  if (!ids_.emplace(token, static_cast<int>(tokens_.size())).second)
    throw SchemaError("duplicate vocabulary token '" + token + "'");
  tokens_.push_back(token);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  if (tokens.size() < kReserved || tokens[0] != kPadToken || tokens[1] != kUnkToken || tokens[2] != kSepToken)
    throw SchemaError("vocabulary must start with the reserved tokens <pad> <unk> <sep>");
  for (std::size_t i = kReserved; i < tokens.size(); ++i) v.push(tokens[i]);
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ContractError("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const Tokens& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Vocab build_vocab(const std::vector<Tokens>& sequences, std::size_t min_count) {
  if (sequences.empty()) throw ContractError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : sequences)
    for (const auto& t : seq)
      if (t != kPadToken && t != kUnkToken && t != kSepToken) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{kPadToken, kUnkToken, kSepToken};
  for (const auto& [tok, c] : items)
    if (c >= min_count) tokens.push_back(tok);
  return Vocab::from_tokens(tokens);
}

}  // namespace caslu::data

#pragma once

#include <span>
#include <string>
#include <vector>

#include "caslu/data/text.hpp"

namespace caslu::data {

struct EditStats {
  std::size_t distance = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
};

// Unit-cost Levenshtein alignment of hypothesis `hyp` against reference
// `ref`. Operation counts come from one canonical backtrace that prefers a
// match, then a substitution, then a deletion, then an insertion.
template <typename Tok>
EditStats edit_distance(std::span<const Tok> ref, std::span<const Tok> hyp);

EditStats edit_distance(const Tokens& ref, const Tokens& hyp);

// Error rates: edit distance over reference length. An empty reference is a
// ContractError.
double wer(const Tokens& ref_words, const Tokens& hyp_words);
double per(const Tokens& ref_phonemes, const Tokens& hyp_phonemes);
// Characters of the space-joined strings, spaces excluded.
double cer(const Tokens& ref_words, const Tokens& hyp_words);

}  // namespace caslu::data

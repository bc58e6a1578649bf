#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "caslu/data/text.hpp"

namespace caslu::data {

using Pronunciation = std::vector<std::string>;

// Word -> pronunciations in file order, plus the phoneme inventory and a
// reverse index from pronunciation to words.
class Lexicon {
 public:
  Lexicon() = default;

  // Parses CMU-dictionary text: "WORD  PH1 PH2 ..." with "WORD(2)" marking
  // alternates. Lines starting with "#" or ";;;" are comments. Words are
  // lowercased, stress digits are stripped from phonemes and phonemes are
  // lowercased. Malformed lines raise SchemaError with the line number.
  static Lexicon parse(std::istream& in);
  static Lexicon load(const std::string& path);

  void add(const std::string& word, Pronunciation pron);

  bool contains(const std::string& word) const { return entries_.count(word) != 0; }
  const std::vector<Pronunciation>& pronunciations(const std::string& word) const;
  const std::set<std::string>& inventory() const { return inventory_; }
  const std::map<Pronunciation, std::set<std::string>>& reverse_index() const { return reverse_; }
  // Words in insertion order.
  const std::vector<std::string>& words() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Frequencies used for homophone tie-breaking; unknown words count 0.
  void set_frequencies(std::unordered_map<std::string, std::size_t> freq) { freq_ = std::move(freq); }
  void count_words(const Tokens& words);
  std::size_t frequency(const std::string& word) const;

 private:
  std::unordered_map<std::string, std::vector<Pronunciation>> entries_;
  std::vector<std::string> order_;
  std::set<std::string> inventory_;
  std::map<Pronunciation, std::set<std::string>> reverse_;
  std::unordered_map<std::string, std::size_t> freq_;
};

// First listed pronunciation per word, concatenated; OOV words become a
// single kUnkToken phoneme.
Tokens g2p(const Tokens& words, const Lexicon& lexicon);

// Same, also reporting which input word produced each phoneme.
Tokens g2p_traced(const Tokens& words, const Lexicon& lexicon, std::vector<std::size_t>* origin);

// Segments a phoneme sequence into lexicon words by dynamic programming
// over total edit distance. A word may cover a span whose length differs
// from its pronunciation by at most `beam`, and only when its edit distance
// is at most half the pronunciation length. Phonemes no word explains cost
// 1 each and surface as one kUnkToken per maximal run. Ties prefer a word
// over UNK, then higher frequency, then the lexicographically smaller word.
Tokens phonemes_to_words(const Tokens& phonemes, const Lexicon& lexicon, std::size_t beam = 1,
                         std::size_t* total_cost = nullptr);

}  // namespace caslu::data

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "caslu/data/text.hpp"
#include "caslu/util/rng.hpp"

namespace caslu::data {

// Phoneme noisy channel: per-position deletion, row-stochastic substitution,
// then insertion of a uniformly drawn phoneme after the position.
struct ConfusionModel {
  std::vector<std::string> phonemes;
  std::vector<std::vector<double>> sub;  // sub[i][j] = P(j | i)
  double p_ins = 0.0;
  double p_del = 0.0;

  // Validates shapes, row sums (1 +- 1e-9), probabilities and rates.
  void validate() const;
  int index_of(const std::string& ph) const;

  static ConfusionModel from_json_text(const std::string& text);
  static ConfusionModel load(const std::string& path);
  static ConfusionModel identity(std::vector<std::string> phonemes);
  std::string to_json_text() const;

 private:
  std::unordered_map<std::string, int> index_;
  void reindex();
  friend ConfusionModel make_confusion(std::vector<std::string>, std::vector<std::vector<double>>, double, double);
};

ConfusionModel make_confusion(std::vector<std::string> phonemes, std::vector<std::vector<double>> sub, double p_ins,
                              double p_del);

// Phonemes outside the inventory are never substituted but may be deleted
// or followed by an insertion. `origin`, when given, maps each input
// position to a source id and receives the source id of every output
// phoneme; inserted phonemes take the id of the position they follow.
Tokens corrupt(const Tokens& phonemes, const ConfusionModel& cm, Rng& rng);
Tokens corrupt_traced(const Tokens& phonemes, const std::vector<std::size_t>& origin_in, const ConfusionModel& cm,
                      Rng& rng, std::vector<std::size_t>* origin_out);

}  // namespace caslu::data

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "caslu/data/text.hpp"

namespace caslu::data {

struct Hypothesis {
  Tokens text;
  Tokens phonemes;
  bool operator==(const Hypothesis&) const = default;
};

struct DatasetExample {
  std::string id;
  Tokens text_clean;
  Tokens text_asr;
  Tokens phonemes_asr;
  std::string label;
  double wer = 0.0;
  // Extra ASR hypotheses after the 1-best, stored as "nbest_asr" when present.
  std::vector<Hypothesis> nbest;
  bool operator==(const DatasetExample&) const = default;
};

// JSON lines, one object per example with fields in the order id,
// text_clean, text_asr, phonemes_asr, label, wer[, nbest_asr]. Text fields
// are space-joined token strings.
std::string to_json_line(const DatasetExample& ex);
DatasetExample from_json_line(const std::string& line, std::size_t lineno);

void write_dataset(std::ostream& out, const std::vector<DatasetExample>& examples);
std::vector<DatasetExample> read_dataset(std::istream& in);
void save_dataset(const std::string& path, const std::vector<DatasetExample>& examples);
std::vector<DatasetExample> load_dataset(const std::string& path);

// Distinct labels in first-seen order.
std::vector<std::string> labels_of(const std::vector<DatasetExample>& examples);

}  // namespace caslu::data

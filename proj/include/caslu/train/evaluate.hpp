#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caslu/train/trainer.hpp"

namespace caslu::train {

struct Bucket {
  double lo = 0.0;
  double hi = 0.0;  // +inf for the last bucket
  std::size_t count = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // empty when count == 0
};

// Buckets [0, b1), [b1, b2), ..., [bk, inf) by per-example WER.
std::vector<Bucket> stratify_by_wer(std::span<const double> wers, std::span<const std::size_t> predictions,
                                    std::span<const std::size_t> labels,
                                    const std::vector<double>& boundaries = {0.3, 0.6});

struct FieldReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<double> per_seed;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  std::vector<std::size_t> predictions;             // single-checkpoint reports only
  std::vector<std::size_t> labels;
  std::vector<Bucket> buckets;
};

struct EvalReport {
  std::string variant;
  std::vector<std::string> classes;
  std::vector<std::uint64_t> seeds;
  std::vector<double> boundaries;
  std::optional<FieldReport> trans;
  std::optional<FieldReport> asr;

  nlohmann::ordered_json to_json() const;
};

struct EvalOptions {
  std::vector<double> boundaries{0.3, 0.6};
  std::optional<std::size_t> nbest_n;  // defaults to the value recorded in the checkpoint
};

// Accuracy of `ckpt` on `test` read from `field`. The checkpoint is not
// modified. Throws ContractError when a test label is not a checkpoint class.
FieldReport evaluate_field(const model::Checkpoint& ckpt, const std::vector<data::DatasetExample>& test,
                           InputField field, const data::Lexicon* lexicon, const EvalOptions& options = {});

EvalReport evaluate(const model::Checkpoint& ckpt, const std::vector<data::DatasetExample>& test,
                    const std::vector<InputField>& fields, const data::Lexicon* lexicon,
                    const EvalOptions& options = {});

// Averages reports of the same variant and classes over seeds. Accuracy is
// the mean of per-seed accuracies, confusion matrices and counts are summed,
// bucket accuracies are averaged over seeds where the bucket is non-empty.
EvalReport average_reports(const std::vector<EvalReport>& reports);

// Rows of variant x {Trans(%), ASR(%)}; "-" marks a field not evaluated.
std::string render_table(const std::vector<EvalReport>& reports);

struct SignTestResult {
  std::size_t a_only = 0;  // a correct, b wrong
  std::size_t b_only = 0;
  double p_value = 1.0;
};

// Two-sided exact binomial sign test on discordant pairs.
SignTestResult sign_test(std::span<const std::size_t> pred_a, std::span<const std::size_t> pred_b,
                         std::span<const std::size_t> labels);
double sign_test_p(std::size_t a_only, std::size_t b_only);

}  // namespace caslu::train

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "caslu/data/dataset.hpp"
#include "caslu/data/lexicon.hpp"
#include "caslu/data/vocab.hpp"
#include "caslu/model/checkpoint.hpp"
#include "caslu/train/adam.hpp"

namespace caslu::train {

using model::InputField;
using model::ModelInput;
using model::Variant;

struct TrainConfig {
  Variant variant = Variant::caslu;
  std::size_t max_len_text = 40;
  std::size_t max_len_phoneme = 80;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t hidden = 150;
  std::size_t text_dim = 128;
  std::size_t phoneme_dim = 128;
  nn::EncoderArch arch = nn::EncoderArch::bilstm;
  std::vector<std::size_t> cnn_widths{3, 4, 5};
  std::size_t cnn_filters = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double vat_lambda = 1.0;
  bool vat_stop_gradient = true;
  std::size_t nbest_n = 3;
  double init_range = 0.1;
  double clip_norm = 0.0;  // 0 disables clipping; 5 is the usual recovery setting
  std::size_t min_count = 1;
  std::size_t shards = 8;  // gradient shards per batch, fixed so results do not depend on thread count
  double cosine_eps = 1e-8;
  bool mask_correlation = true;
  double stop_at_dev_accuracy = 0.0;  // end training once dev accuracy reaches this; 0 disables

  // Flat "key = value" assignment as used by config files and flags.
  // Unknown keys and malformed values raise SchemaError.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static std::vector<std::string> keys();

  model::ModelConfig model_config(std::size_t text_vocab, std::size_t phoneme_vocab, std::size_t classes) const;
};

// Parses "key = value" lines; '#' starts a comment.
TrainConfig parse_config(std::istream& in, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

struct Vocabularies {
  data::Vocab text;
  data::Vocab phoneme;
};

// Built from the fields the variant consumes during training.
Vocabularies build_vocabularies(const std::vector<data::DatasetExample>& train, Variant variant,
                                const data::Lexicon* lexicon, std::size_t min_count = 1);

// Sorted distinct labels.
std::vector<std::string> class_list(const std::vector<data::DatasetExample>& examples);

// Encodes one side pair, truncating to the maxima; an empty side becomes [UNK].
ModelInput encode_input(const data::Tokens& text, const data::Tokens& phonemes, const data::Vocab& text_vocab,
                        const data::Vocab& phoneme_vocab, std::size_t max_text, std::size_t max_phoneme);

// Model inputs of one example read from `field`. For trans the phonemes are
// derived from text_clean through the lexicon (required only when the
// variant uses phonemes). For CASLU_NBEST on the asr field the list holds
// the 1-best followed by the extra hypotheses; otherwise it has one entry.
struct PreparedExample {
  std::vector<ModelInput> inputs;
  std::size_t label = 0;
  double wer = 0.0;
};

PreparedExample prepare_example(const data::DatasetExample& ex, InputField field, const model::ModelConfig& config,
                                const data::Vocab& text_vocab, const data::Vocab& phoneme_vocab,
                                const std::map<std::string, std::size_t>& class_index, const data::Lexicon* lexicon,
                                std::size_t nbest_n);

// Argmax class of every example; runs examples in parallel, each on its own
// tape. CASLU_NBEST examples with several inputs go through the N-best path.
std::vector<std::size_t> predict_labels(const model::Model<float>& model, const std::vector<PreparedExample>& examples,
                                        std::size_t nbest_n);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  model::Checkpoint checkpoint;  // parameters of the best dev epoch
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

// Index of the best dev accuracy, earliest on ties.
std::size_t best_epoch_index(const std::vector<double>& dev_trace);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Trains one model with `seed`. Dev accuracy is measured on the variant's
// training field. Throws ContractError for an empty split or a dev label
// unseen in train, DivergenceError when a batch loss is not finite.
TrainResult train(const TrainConfig& config, std::uint64_t seed, const std::vector<data::DatasetExample>& train_set,
                  const std::vector<data::DatasetExample>& dev_set, const data::Lexicon* lexicon,
                  const EpochCallback& on_epoch = {});

}  // namespace caslu::train

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caslu/nn/cross_attention.hpp"
#include "caslu/nn/encoders.hpp"
#include "json.hpp"

namespace caslu::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using nn::Bound;
using nn::EncoderArch;
using nn::ParamSet;

enum class Variant { caslu, text_only_trs, text_only_asr, multi_input, caslu_wo_t, caslu_wo_p, caslu_vat, caslu_nbest };

inline constexpr Variant kAllVariants[] = {Variant::caslu,      Variant::text_only_trs, Variant::text_only_asr,
                                           Variant::multi_input, Variant::caslu_wo_t,   Variant::caslu_wo_p,
                                           Variant::caslu_vat,  Variant::caslu_nbest};

// Canonical tags: CASLU, TEXT_ONLY_TRS, TEXT_ONLY_ASR, MULTI_INPUT,
// CASLU_WO_T, CASLU_WO_P, CASLU_VAT, CASLU_NBEST.
std::string to_string(Variant v);
// Case-insensitive; also accepts b1, b2, b3, text_only (= TEXT_ONLY_ASR),
// wo_t, wo_p, vat, nbest.
Variant variant_from_string(const std::string& s);

bool uses_phonemes(Variant v);
bool uses_attention(Variant v);

enum class InputField { trans, asr };
std::string to_string(InputField f);
InputField field_from_string(const std::string& s);
// Field a variant learns from: the transcription for TEXT_ONLY_TRS, the
// 1-best ASR hypothesis otherwise.
InputField training_field(Variant v);

struct ModelConfig {
  Variant variant = Variant::caslu;
  std::size_t text_vocab = 0;
  std::size_t phoneme_vocab = 0;
  std::size_t num_classes = 0;
  std::size_t text_dim = 128;
  std::size_t phoneme_dim = 128;
  EncoderArch arch = EncoderArch::bilstm;
  std::size_t hidden = 150;
  std::vector<std::size_t> cnn_widths{3, 4, 5};
  std::size_t cnn_filters = 100;
  std::size_t max_len_text = 40;
  std::size_t max_len_phoneme = 80;
  double cosine_eps = 1e-8;
  bool mask_correlation = true;
  double init_range = 0.1;

  nn::EncoderConfig text_encoder() const;
  nn::EncoderConfig phoneme_encoder() const;
  std::size_t hidden_width() const;
  std::size_t classifier_width() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Model {
  ModelConfig config;
  ParamSet<T> params;
};

// Uniform(-init_range, init_range) embeddings, encoder and classifier
// weights; zero biases, zero attention kernels, zero PAD embedding rows.
template <typename T>
Model<T> init_model(const ModelConfig& config, std::uint64_t seed);

// Unpadded token ids of one utterance.
struct ModelInput {
  std::vector<int> text;
  std::vector<int> phonemes;
  bool operator==(const ModelInput&) const = default;
};

struct ForwardResult {
  Var logits;  // 1 x num_classes
  bool has_attention = false;
  nn::CorrelationMap correlation;
  Var alpha, beta;  // present when has_attention
  std::size_t text_len = 0, phoneme_len = 0;
};

// Pads each side to its configured maximum and runs the variant's graph.
// Text-only variants never read `input.phonemes`.
template <typename T>
ForwardResult forward(Bound<T>& bound, const ModelConfig& config, const ModelInput& input);

// Joins hypotheses (at most n, in order) with the SEP id on both sides and
// truncates each side to its maximum.
ModelInput concat_hypotheses(const std::vector<ModelInput>& hypotheses, std::size_t n, std::size_t max_text,
                             std::size_t max_phoneme);

template <typename T>
ForwardResult nbest_forward(Bound<T>& bound, const ModelConfig& config, const std::vector<ModelInput>& hypotheses,
                            std::size_t n);

// -log softmax(logits)[label].
template <typename T>
Var classification_loss(Tape<T>& tape, Var logits, std::size_t label);

// KL(softmax(clean) || softmax(asr)) in nats. With `stop_gradient` the
// clean distribution is a constant.
template <typename T>
Var kl_term(Tape<T>& tape, Var clean_logits, Var asr_logits, bool stop_gradient = true);

// KL(p || softmax(asr)) for a fixed distribution p.
template <typename T>
Var kl_from_fixed(Tape<T>& tape, std::span<const double> p, Var asr_logits);

// Cross-entropy on the clean input plus lambda times the KL term.
template <typename T>
Var vat_loss(Bound<T>& bound, const ModelConfig& config, const ModelInput& clean, const ModelInput& asr,
             std::size_t label, double lambda = 1.0, bool stop_gradient = true);

// Discrete KL(p || q), natural log, 0 log 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probs;
  std::size_t label = 0;
  std::optional<nn::AttentionTrace> trace;  // numbers only; tokens are the caller's
};

std::vector<double> softmax(std::span<const double> logits);
// Lowest index among maxima.
std::size_t argmax(std::span<const double> values);

template <typename T>
Prediction predict(const Model<T>& model, const ModelInput& input, bool with_trace = false);
template <typename T>
Prediction predict_nbest(const Model<T>& model, const std::vector<ModelInput>& hypotheses, std::size_t n);

}  // namespace caslu::model

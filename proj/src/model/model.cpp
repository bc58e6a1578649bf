#include "caslu/model/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace caslu::model {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::caslu: return "CASLU";
    case Variant::text_only_trs: return "TEXT_ONLY_TRS";
    case Variant::text_only_asr: return "TEXT_ONLY_ASR";
    case Variant::multi_input: return "MULTI_INPUT";
    case Variant::caslu_wo_t: return "CASLU_WO_T";
    case Variant::caslu_wo_p: return "CASLU_WO_P";
    case Variant::caslu_vat: return "CASLU_VAT";
    case Variant::caslu_nbest: return "CASLU_NBEST";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (Variant v : kAllVariants)
    if (to_string(v) == u) return v;
  if (u == "B1") return Variant::text_only_trs;
  if (u == "B2" || u == "TEXT_ONLY") return Variant::text_only_asr;
  if (u == "B3") return Variant::multi_input;
  if (u == "WO_T") return Variant::caslu_wo_t;
  if (u == "WO_P") return Variant::caslu_wo_p;
  if (u == "VAT" || u == "CASLU+VAT") return Variant::caslu_vat;
  if (u == "NBEST" || u == "CASLU+NBEST" || u == "CASLU+N_BEST") return Variant::caslu_nbest;
  throw ContractError("unknown model variant '" + s + "'");
}

bool uses_phonemes(Variant v) { return v != Variant::text_only_trs && v != Variant::text_only_asr; }

bool uses_attention(Variant v) { return uses_phonemes(v) && v != Variant::multi_input; }

std::string to_string(InputField f) { return f == InputField::trans ? "trans" : "asr"; }

InputField field_from_string(const std::string& s) {
  if (s == "trans") return InputField::trans;
  if (s == "asr") return InputField::asr;
  throw ContractError("input field must be 'trans' or 'asr', got '" + s + "'");
}

InputField training_field(Variant v) { return v == Variant::text_only_trs ? InputField::trans : InputField::asr; }

nn::EncoderConfig ModelConfig::text_encoder() const {
  return {arch, text_dim, hidden, cnn_widths, cnn_filters, max_len_text};
}

nn::EncoderConfig ModelConfig::phoneme_encoder() const {
  return {arch, phoneme_dim, hidden, cnn_widths, cnn_filters, max_len_phoneme};
}

std::size_t ModelConfig::hidden_width() const { return nn::output_width(text_encoder()); }

std::size_t ModelConfig::classifier_width() const {
  const std::size_t d = hidden_width();
  switch (variant) {
    case Variant::caslu:
    case Variant::multi_input:
    case Variant::caslu_vat:
    case Variant::caslu_nbest: return 2 * d;
    default: return d;
  }
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractError(std::string("model config: ") + name + " must be positive");
  };
  positive(text_vocab, "text_vocab");
  if (uses_phonemes(variant)) positive(phoneme_vocab, "phoneme_vocab");
  positive(num_classes, "num_classes");
  positive(text_dim, "text_dim");
  positive(phoneme_dim, "phoneme_dim");
  positive(hidden, "hidden");
  positive(max_len_text, "max_len_text");
  positive(max_len_phoneme, "max_len_phoneme");
  if (arch == EncoderArch::cnn) {
    positive(cnn_filters, "cnn_filters");
    if (cnn_widths.empty()) throw ContractError("model config: cnn_widths is empty");
    for (auto w : cnn_widths) positive(w, "cnn width");
  }
  if (!(cosine_eps > 0)) throw ContractError("model config: cosine_eps must be positive");
  if (!(init_range > 0)) throw ContractError("model config: init_range must be positive");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = to_string(variant);
  j["text_vocab"] = text_vocab;
  j["phoneme_vocab"] = phoneme_vocab;
  j["num_classes"] = num_classes;
  j["text_dim"] = text_dim;
  j["phoneme_dim"] = phoneme_dim;
  j["arch"] = nn::to_string(arch);
  j["hidden"] = hidden;
  j["cnn_widths"] = cnn_widths;
  j["cnn_filters"] = cnn_filters;
  j["max_len_text"] = max_len_text;
  j["max_len_phoneme"] = max_len_phoneme;
  j["cosine_eps"] = cosine_eps;
  j["mask_correlation"] = mask_correlation;
  j["init_range"] = init_range;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.text_vocab = j.at("text_vocab").get<std::size_t>();
  c.phoneme_vocab = j.at("phoneme_vocab").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.phoneme_dim = j.at("phoneme_dim").get<std::size_t>();
  c.arch = nn::encoder_arch_from_string(j.at("arch").get<std::string>());
  c.hidden = j.at("hidden").get<std::size_t>();
  c.cnn_widths = j.at("cnn_widths").get<std::vector<std::size_t>>();
  c.cnn_filters = j.at("cnn_filters").get<std::size_t>();
  c.max_len_text = j.at("max_len_text").get<std::size_t>();
  c.max_len_phoneme = j.at("max_len_phoneme").get<std::size_t>();
  c.cosine_eps = j.at("cosine_eps").get<double>();
  c.mask_correlation = j.at("mask_correlation").get<bool>();
  c.init_range = j.at("init_range").get<double>();
  return c;
}

template <typename T>
Model<T> init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const double r = config.init_range;
  Model<T> m{config, {}};
  auto& p = m.params;
  auto embedding = [&](const std::string& name, std::size_t vocab, std::size_t dim) {
    auto t = nn::uniform_tensor<T>({vocab, dim}, rng, -r, r);
    std::fill(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(dim), T(0));
    p.add(name, std::move(t));
  };
  embedding("text.embedding", config.text_vocab, config.text_dim);
  nn::add_encoder_params(p, "text.encoder", config.text_encoder(), rng, r);
  if (uses_phonemes(config.variant)) {
    embedding("phoneme.embedding", config.phoneme_vocab, config.phoneme_dim);
    nn::add_encoder_params(p, "phoneme.encoder", config.phoneme_encoder(), rng, r);
  }
  if (uses_attention(config.variant)) {
    if (config.variant != Variant::caslu_wo_t) p.add("attention.k_text", Tensor<T>({config.max_len_phoneme, 1}));
    if (config.variant != Variant::caslu_wo_p) p.add("attention.k_phoneme", Tensor<T>({config.max_len_text, 1}));
  }
  p.add("classifier.w", nn::uniform_tensor<T>({config.classifier_width(), config.num_classes}, rng, -r, r));
  p.add("classifier.b", Tensor<T>({1, config.num_classes}));
  return m;
}

namespace {

std::pair<std::vector<int>, ad::Mask> pad(const std::vector<int>& ids, std::size_t max_len, const char* side) {
  if (ids.size() > max_len)
    throw DimensionError(std::string(side) + " sequence of length " + std::to_string(ids.size()) +
                         " exceeds maximum " + std::to_string(max_len));
  if (ids.empty()) throw DegenerateMaskError(std::string(side) + " sequence is empty");
  std::vector<int> out(max_len, nn::kPadId);
  ad::Mask mask(max_len, 0);
  std::copy(ids.begin(), ids.end(), out.begin());
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(ids.size()), 1);
  return {std::move(out), std::move(mask)};
}

template <typename T>
nn::EncodedSequence encode_side(Bound<T>& bound, const std::string& side, const std::vector<int>& ids,
                                const nn::EncoderConfig& cfg) {
  auto [padded, mask] = pad(ids, cfg.max_len, side.c_str());
  Var emb = bound.embed(side + ".embedding", padded, mask);
  return nn::encode(bound, side + ".encoder", emb, mask, cfg);
}

}  // namespace

template <typename T>
ForwardResult forward(Bound<T>& bound, const ModelConfig& config, const ModelInput& input) {
  Tape<T>& tape = bound.tape();
  ForwardResult r;
  r.text_len = input.text.size();
  auto words = encode_side(bound, "text", input.text, config.text_encoder());
  Var features;
  if (!uses_phonemes(config.variant)) {
    features = nn::uniform_pool(tape, words);
  } else {
    r.phoneme_len = input.phonemes.size();
    auto phones = encode_side(bound, "phoneme", input.phonemes, config.phoneme_encoder());
    if (config.variant == Variant::multi_input) {
      Var parts[] = {nn::uniform_pool(tape, words), nn::uniform_pool(tape, phones)};
      features = tape.concat_cols(parts);
    } else {
      r.has_attention = true;
      r.correlation = nn::correlation_map(tape, words, phones, static_cast<T>(config.cosine_eps), config.mask_correlation);
      std::vector<Var> parts;
      if (config.variant != Variant::caslu_wo_t) {
        r.alpha = nn::row_attention(tape, r.correlation, bound("attention.k_text"));
        parts.push_back(nn::attend_pool(tape, words, r.alpha));
      }
      if (config.variant != Variant::caslu_wo_p) {
        r.beta = nn::col_attention(tape, r.correlation, bound("attention.k_phoneme"));
        parts.push_back(nn::attend_pool(tape, phones, r.beta));
      }
      features = parts.size() == 1 ? parts[0] : tape.concat_cols(parts);
    }
  }
  r.logits = tape.add(tape.matmul(features, bound("classifier.w")), bound("classifier.b"));
  return r;
}

ModelInput concat_hypotheses(const std::vector<ModelInput>& hypotheses, std::size_t n, std::size_t max_text,
                             std::size_t max_phoneme) {
  if (hypotheses.empty()) throw ContractError("n-best: empty hypothesis list");
  if (n == 0) throw ContractError("n-best: n must be >= 1");
  ModelInput out;
  const std::size_t used = std::min(n, hypotheses.size());
  for (std::size_t k = 0; k < used; ++k) {
    if (k) {
      out.text.push_back(nn::kSepId);
      out.phonemes.push_back(nn::kSepId);
    }
    out.text.insert(out.text.end(), hypotheses[k].text.begin(), hypotheses[k].text.end());
    out.phonemes.insert(out.phonemes.end(), hypotheses[k].phonemes.begin(), hypotheses[k].phonemes.end());
  }
  if (out.text.size() > max_text) out.text.resize(max_text);
  if (out.phonemes.size() > max_phoneme) out.phonemes.resize(max_phoneme);
  return out;
}

template <typename T>
ForwardResult nbest_forward(Bound<T>& bound, const ModelConfig& config, const std::vector<ModelInput>& hypotheses,
                            std::size_t n) {
  return forward(bound, config, concat_hypotheses(hypotheses, n, config.max_len_text, config.max_len_phoneme));
}

template <typename T>
Var classification_loss(Tape<T>& tape, Var logits, std::size_t label) {
  if (label >= tape.cols(logits))
    throw ContractError("label " + std::to_string(label) + " out of range for " + std::to_string(tape.cols(logits)) +
                        " classes");
  return tape.cross_entropy(logits, label);
}

template <typename T>
Var kl_term(Tape<T>& tape, Var clean_logits, Var asr_logits, bool stop_gradient) {
  if (tape.cols(clean_logits) != tape.cols(asr_logits) || tape.rows(clean_logits) != 1 || tape.rows(asr_logits) != 1)
    throw DimensionError("kl_term: logits must be matching single rows");
  Var log_q = tape.log_softmax(asr_logits);
  Var log_p = tape.log_softmax(clean_logits);
  if (stop_gradient) log_p = tape.constant(tape.tensor(log_p));
  return tape.sum(tape.mul(tape.exp(log_p), tape.sub(log_p, log_q)));
}

template <typename T>
Var kl_from_fixed(Tape<T>& tape, std::span<const double> p, Var asr_logits) {
  if (tape.rows(asr_logits) != 1 || tape.cols(asr_logits) != p.size())
    throw DimensionError("kl_from_fixed: distribution and logits differ in length");
  const std::size_t K = p.size();
  std::vector<T> pt(K), log_pt(K);
  for (std::size_t i = 0; i < K; ++i) {
    pt[i] = static_cast<T>(p[i]);
    log_pt[i] = p[i] > 0 ? static_cast<T>(std::log(p[i])) : T(0);
  }
  Var diff = tape.sub(tape.constant(1, K, std::move(log_pt)), tape.log_softmax(asr_logits));
  return tape.sum(tape.mul(tape.constant(1, K, std::move(pt)), diff));
}

template <typename T>
Var vat_loss(Bound<T>& bound, const ModelConfig& config, const ModelInput& clean, const ModelInput& asr,
             std::size_t label, double lambda, bool stop_gradient) {
  Tape<T>& tape = bound.tape();
  Var clean_logits = forward(bound, config, clean).logits;
  Var asr_logits = forward(bound, config, asr).logits;
  Var ce = classification_loss(tape, clean_logits, label);
  return tape.add(ce, tape.scale(kl_term(tape, clean_logits, asr_logits, stop_gradient), static_cast<T>(lambda)));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("kl_divergence: length mismatch");
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0) continue;
    if (q[i] == 0) return std::numeric_limits<double>::infinity();
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += out[i] = std::exp(logits[i] - m);
  for (auto& v : out) v /= z;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

template <typename T>
Prediction to_prediction(Tape<T>& tape, const ForwardResult& r, bool with_trace) {
  Prediction p;
  for (T v : tape.value(r.logits)) p.logits.push_back(static_cast<double>(v));
  p.probs = softmax(p.logits);
  p.label = argmax(p.logits);
  if (with_trace && r.has_attention) {
    nn::AttentionTrace tr;
    auto c = tape.tensor(r.correlation.c);
    tr.correlation.assign(r.text_len, std::vector<double>(r.phoneme_len));
    for (std::size_t i = 0; i < r.text_len; ++i)
      for (std::size_t j = 0; j < r.phoneme_len; ++j) tr.correlation[i][j] = static_cast<double>(c.at(i, j));
    auto take = [&](Var v, std::size_t n, std::vector<double>& dst) {
      if (!v.valid()) return;
      auto vals = tape.value(v);
      for (std::size_t i = 0; i < n; ++i) dst.push_back(static_cast<double>(vals[i]));
    };
    take(r.alpha, r.text_len, tr.alpha);
    take(r.beta, r.phoneme_len, tr.beta);
    p.trace = std::move(tr);
  }
  return p;
}

}  // namespace

template <typename T>
Prediction predict(const Model<T>& model, const ModelInput& input, bool with_trace) {
  Tape<T> tape;
  Bound<T> bound(tape, model.params);
  return to_prediction(tape, forward(bound, model.config, input), with_trace);
}

template <typename T>
Prediction predict_nbest(const Model<T>& model, const std::vector<ModelInput>& hypotheses, std::size_t n) {
  Tape<T> tape;
  Bound<T> bound(tape, model.params);
  return to_prediction(tape, nbest_forward(bound, model.config, hypotheses, n), false);
}

#define CASLU_INSTANTIATE(T)                                                                                   \
  template Model<T> init_model<T>(const ModelConfig&, std::uint64_t);                                          \
  template ForwardResult forward<T>(Bound<T>&, const ModelConfig&, const ModelInput&);                         \
  template ForwardResult nbest_forward<T>(Bound<T>&, const ModelConfig&, const std::vector<ModelInput>&,       \
                                          std::size_t);                                                        \
  template Var classification_loss<T>(Tape<T>&, Var, std::size_t);                                             \
  template Var kl_term<T>(Tape<T>&, Var, Var, bool);                                                           \
  template Var kl_from_fixed<T>(Tape<T>&, std::span<const double>, Var);                                       \
  template Var vat_loss<T>(Bound<T>&, const ModelConfig&, const ModelInput&, const ModelInput&, std::size_t,   \
                           double, bool);                                                                      \
  template Prediction predict<T>(const Model<T>&, const ModelInput&, bool);                                    \
  template Prediction predict_nbest<T>(const Model<T>&, const std::vector<ModelInput>&, std::size_t);

CASLU_INSTANTIATE(float)
CASLU_INSTANTIATE(double)

#undef CASLU_INSTANTIATE

}  // namespace caslu::model

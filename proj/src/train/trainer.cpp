#include "caslu/train/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "caslu/data/text.hpp"

namespace caslu::train {

using ad::Tape;
using ad::Var;
using data::Tokens;
using data::Vocab;
using nn::Bound;
using nn::ParamSet;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw SchemaError("config key '" + key + "': '" + value + "' is not " + expected);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

template <typename U>
std::vector<U> parse_list(const std::string& key, const std::string& v) {
  std::vector<U> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<U>(parse_size(key, trim(item))));
  if (out.empty()) bad_value(key, v, "a comma-separated list");
  return out;
}

template <typename U>
std::string join_list(const std::vector<U>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::vector<std::string> TrainConfig::keys() {
  return {"variant",      "max_len_text", "max_len_phoneme", "batch_size",  "epochs",
          "lr",           "beta1",        "beta2",           "adam_eps",    "hidden",
          "text_dim",     "phoneme_dim",  "arch",            "cnn_widths",  "cnn_filters",
          "seeds",        "vat_lambda",   "vat_stop_gradient", "nbest_n",   "init_range",
          "clip_norm",    "min_count",    "shards",          "cosine_eps",  "mask_correlation",
          "stop_at_dev_accuracy"};
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  try {
    if (key == "variant") variant = model::variant_from_string(v);
    else if (key == "max_len_text") max_len_text = parse_size(key, v);
    else if (key == "max_len_phoneme") max_len_phoneme = parse_size(key, v);
    else if (key == "batch_size") batch_size = parse_size(key, v);
    else if (key == "epochs") epochs = parse_size(key, v);
    else if (key == "lr") lr = parse_double(key, v);
    else if (key == "beta1") beta1 = parse_double(key, v);
    else if (key == "beta2") beta2 = parse_double(key, v);
    else if (key == "adam_eps") adam_eps = parse_double(key, v);
    else if (key == "hidden") hidden = parse_size(key, v);
    else if (key == "text_dim") text_dim = parse_size(key, v);
    else if (key == "phoneme_dim") phoneme_dim = parse_size(key, v);
    else if (key == "arch") arch = nn::encoder_arch_from_string(v);
    else if (key == "cnn_widths") cnn_widths = parse_list<std::size_t>(key, v);
    else if (key == "cnn_filters") cnn_filters = parse_size(key, v);
    else if (key == "seeds") seeds = parse_list<std::uint64_t>(key, v);
    else if (key == "vat_lambda") vat_lambda = parse_double(key, v);
    else if (key == "vat_stop_gradient") vat_stop_gradient = parse_bool(key, v);
    else if (key == "nbest_n") nbest_n = parse_size(key, v);
    else if (key == "init_range") init_range = parse_double(key, v);
    else if (key == "clip_norm") clip_norm = parse_double(key, v);
    else if (key == "min_count") min_count = parse_size(key, v);
    else if (key == "shards") shards = parse_size(key, v);
    else if (key == "cosine_eps") cosine_eps = parse_double(key, v);
    else if (key == "mask_correlation") mask_correlation = parse_bool(key, v);
    else if (key == "stop_at_dev_accuracy") stop_at_dev_accuracy = parse_double(key, v);
    else throw SchemaError("unknown config key '" + key + "'");
  } catch (const ContractError& e) {
    throw SchemaError(std::string("config key '") + key + "': " + e.what());
  }
}

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractError(std::string("train config: ") + name + " must be positive");
  };
  positive(max_len_text, "max_len_text");
  positive(max_len_phoneme, "max_len_phoneme");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  positive(hidden, "hidden");
  positive(text_dim, "text_dim");
  positive(phoneme_dim, "phoneme_dim");
  positive(nbest_n, "nbest_n");
  positive(min_count, "min_count");
  positive(shards, "shards");
  if (seeds.empty()) throw ContractError("train config: seeds is empty");
  if (!(lr > 0)) throw ContractError("train config: lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ContractError("train config: beta1 and beta2 must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ContractError("train config: adam_eps must be positive");
  if (!(vat_lambda >= 0)) throw ContractError("train config: vat_lambda must be non-negative");
  if (!(clip_norm >= 0)) throw ContractError("train config: clip_norm must be non-negative");
  if (!(stop_at_dev_accuracy >= 0 && stop_at_dev_accuracy <= 1))
    throw ContractError("train config: stop_at_dev_accuracy must lie in [0, 1]");
  model_config(Vocab::kReserved, Vocab::kReserved, 1).validate();
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = model::to_string(variant);
  j["max_len_text"] = max_len_text;
  j["max_len_phoneme"] = max_len_phoneme;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["hidden"] = hidden;
  j["text_dim"] = text_dim;
  j["phoneme_dim"] = phoneme_dim;
  j["arch"] = nn::to_string(arch);
  j["cnn_widths"] = join_list(cnn_widths);
  j["cnn_filters"] = cnn_filters;
  j["seeds"] = join_list(seeds);
  j["vat_lambda"] = vat_lambda;
  j["vat_stop_gradient"] = vat_stop_gradient;
  j["nbest_n"] = nbest_n;
  j["init_range"] = init_range;
  j["clip_norm"] = clip_norm;
  j["min_count"] = min_count;
  j["shards"] = shards;
  j["cosine_eps"] = cosine_eps;
  j["mask_correlation"] = mask_correlation;
  j["stop_at_dev_accuracy"] = stop_at_dev_accuracy;
  return j;
}

model::ModelConfig TrainConfig::model_config(std::size_t text_vocab, std::size_t phoneme_vocab,
                                             std::size_t classes) const {
  model::ModelConfig mc;
  mc.variant = variant;
  mc.text_vocab = text_vocab;
  mc.phoneme_vocab = phoneme_vocab;
  mc.num_classes = classes;
  mc.text_dim = text_dim;
  mc.phoneme_dim = phoneme_dim;
  mc.arch = arch;
  mc.hidden = hidden;
  mc.cnn_widths = cnn_widths;
  mc.cnn_filters = cnn_filters;
  mc.max_len_text = max_len_text;
  mc.max_len_phoneme = max_len_phoneme;
  mc.cosine_eps = cosine_eps;
  mc.mask_correlation = mask_correlation;
  mc.init_range = init_range;
  return mc;
}

TrainConfig parse_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("expected 'key = value'", lineno);
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const SchemaError& e) {
      throw SchemaError(e.detail(), lineno);
    }
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file", 0, path);
  try {
    return parse_config(in, std::move(base));
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

namespace {

const data::Lexicon& need_lexicon(const data::Lexicon* lexicon) {
  if (!lexicon) throw ContractError("a lexicon is required to derive phonemes from transcriptions");
  return *lexicon;
}

}  // namespace

Vocabularies build_vocabularies(const std::vector<data::DatasetExample>& train, Variant variant,
                                const data::Lexicon* lexicon, std::size_t min_count) {
  if (train.empty()) throw ContractError("build_vocabularies: empty training split");
  std::vector<Tokens> texts, phonemes;
  for (const auto& ex : train) {
    switch (variant) {
      case Variant::text_only_trs: texts.push_back(ex.text_clean); break;
      case Variant::text_only_asr: texts.push_back(ex.text_asr); break;
      case Variant::caslu_vat:
        texts.push_back(ex.text_clean);
        texts.push_back(ex.text_asr);
        phonemes.push_back(data::g2p(ex.text_clean, need_lexicon(lexicon)));
        phonemes.push_back(ex.phonemes_asr);
        break;
      case Variant::caslu_nbest:
        texts.push_back(ex.text_asr);
        phonemes.push_back(ex.phonemes_asr);
        for (const auto& h : ex.nbest) {
          texts.push_back(h.text);
          phonemes.push_back(h.phonemes);
        }
        break;
      default:
        texts.push_back(ex.text_asr);
        phonemes.push_back(ex.phonemes_asr);
    }
  }
  Vocabularies v;
  v.text = data::build_vocab(texts, min_count);
  if (!phonemes.empty()) v.phoneme = data::build_vocab(phonemes, min_count);
  return v;
}

std::vector<std::string> class_list(const std::vector<data::DatasetExample>& examples) {
  std::set<std::string> s;
  for (const auto& ex : examples) s.insert(ex.label);
  return {s.begin(), s.end()};
}

ModelInput encode_input(const Tokens& text, const Tokens& phonemes, const Vocab& text_vocab,
                        const Vocab& phoneme_vocab, std::size_t max_text, std::size_t max_phoneme) {
  auto side = [](const Tokens& toks, const Vocab& vocab, std::size_t max_len) {
    std::vector<int> ids = vocab.encode(toks);
    if (ids.size() > max_len) ids.resize(max_len);
    if (ids.empty()) ids.push_back(Vocab::kUnk);
    return ids;
  };
  return {side(text, text_vocab, max_text), side(phonemes, phoneme_vocab, max_phoneme)};
}

PreparedExample prepare_example(const data::DatasetExample& ex, InputField field, const model::ModelConfig& config,
                                const Vocab& text_vocab, const Vocab& phoneme_vocab,
                                const std::map<std::string, std::size_t>& class_index, const data::Lexicon* lexicon,
                                std::size_t nbest_n) {
  PreparedExample out;
  auto it = class_index.find(ex.label);
  if (it == class_index.end())
    throw ContractError("example " + ex.id + ": label '" + ex.label + "' was not seen in training");
  out.label = it->second;
  out.wer = ex.wer;

  const bool phon = model::uses_phonemes(config.variant);
  auto make = [&](const Tokens& text, const Tokens& phonemes) {
    ModelInput in = encode_input(text, phon ? phonemes : Tokens{}, text_vocab, phoneme_vocab, config.max_len_text,
                                 config.max_len_phoneme);
    if (!phon) in.phonemes.clear();
    return in;
  };

  if (field == InputField::trans) {
    out.inputs.push_back(make(ex.text_clean, phon ? data::g2p(ex.text_clean, need_lexicon(lexicon)) : Tokens{}));
    return out;
  }
  out.inputs.push_back(make(ex.text_asr, ex.phonemes_asr));
  if (config.variant == Variant::caslu_nbest)
    for (std::size_t k = 0; k < ex.nbest.size() && out.inputs.size() < nbest_n; ++k)
      out.inputs.push_back(make(ex.nbest[k].text, ex.nbest[k].phonemes));
  return out;
}

namespace {

// Runs body(i) for i in [0, n) in parallel and rethrows the first failure
// by index.
template <typename Body>
void parallel_for(std::size_t n, Body body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::map<std::string, std::size_t> index_classes(const std::vector<std::string>& classes) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < classes.size(); ++i) m[classes[i]] = i;
  return m;
}

}  // namespace

std::vector<std::size_t> predict_labels(const model::Model<float>& model, const std::vector<PreparedExample>& examples,
                                        std::size_t nbest_n) {
  std::vector<std::size_t> out(examples.size());
  const bool nbest = model.config.variant == Variant::caslu_nbest;
  parallel_for(examples.size(), [&](std::size_t i) {
    const auto& in = examples[i].inputs;
    out[i] = nbest ? model::predict_nbest(model, in, nbest_n).label : model::predict(model, in.front()).label;
  });
  return out;
}

std::size_t best_epoch_index(const std::vector<double>& dev_trace) {
  if (dev_trace.empty()) throw ContractError("best_epoch_index: empty trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_trace.size(); ++i)
    if (dev_trace[i] > dev_trace[best]) best = i;
  return best;
}

namespace {

struct TrainItem {
  PreparedExample main;
  PreparedExample clean;  // VAT only
};

double accuracy_of(const std::vector<std::size_t>& pred, const std::vector<PreparedExample>& examples) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == examples[i].label;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace

TrainResult train(const TrainConfig& config, std::uint64_t seed, const std::vector<data::DatasetExample>& train_set,
                  const std::vector<data::DatasetExample>& dev_set, const data::Lexicon* lexicon,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training split");
  if (dev_set.empty()) throw ContractError("train: empty dev split");

  const Variant variant = config.variant;
  const std::vector<std::string> classes = class_list(train_set);
  const auto class_index = index_classes(classes);
  Vocabularies vocab = build_vocabularies(train_set, variant, lexicon, config.min_count);
  const model::ModelConfig mc = config.model_config(vocab.text.size(), vocab.phoneme.size(), classes.size());
  model::Model<float> model = model::init_model<float>(mc, derive_seed(seed, "init"));

  const InputField field = model::training_field(variant);
  const bool vat = variant == Variant::caslu_vat;
  const bool nbest = variant == Variant::caslu_nbest;
  auto prep = [&](const data::DatasetExample& ex, InputField f) {
    return prepare_example(ex, f, mc, vocab.text, vocab.phoneme, class_index, lexicon, config.nbest_n);
  };
  std::vector<TrainItem> items(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    items[i].main = prep(train_set[i], field);
    if (vat) items[i].clean = prep(train_set[i], InputField::trans);
  }
  std::vector<PreparedExample> dev(dev_set.size());
  for (std::size_t i = 0; i < dev_set.size(); ++i) dev[i] = prep(dev_set[i], field);

  auto example_loss = [&](Bound<float>& bound, const TrainItem& item) {
    auto& tape = bound.tape();
    if (vat)
      return model::vat_loss(bound, mc, item.clean.inputs.front(), item.main.inputs.front(), item.main.label,
                             config.vat_lambda, config.vat_stop_gradient);
    const model::ForwardResult fr = nbest ? model::nbest_forward(bound, mc, item.main.inputs, config.nbest_n)
                                          : model::forward(bound, mc, item.main.inputs.front());
    return model::classification_loss(tape, fr.logits, item.main.label);
  };

  AdamState<float> adam = AdamState<float>::fresh(model.params, {config.lr, config.beta1, config.beta2, config.adam_eps});
  const std::size_t n_shards = std::min(config.shards, config.batch_size);
  std::vector<ParamSet<float>> shard_grads(n_shards, model.params.zeros_like());
  ParamSet<float> grads = model.params.zeros_like();
  std::vector<double> shard_loss(n_shards);

  TrainResult result;
  ParamSet<float> best_params = model.params;
  double best_acc = -1.0;

  std::vector<std::size_t> order(items.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      ++batch_no;
      const std::size_t n = std::min(config.batch_size, order.size() - b0);
      const std::size_t shards = std::min(n_shards, n);
      for (std::size_t s = 0; s < shards; ++s) {
        shard_grads[s].fill_zero();
        shard_loss[s] = 0.0;
      }
      parallel_for(shards, [&](std::size_t s) {
        for (std::size_t j = s * n / shards; j < (s + 1) * n / shards; ++j) {
          Tape<float> tape;
          Bound<float> bound(tape, model.params, &shard_grads[s]);
          Var loss = example_loss(bound, items[order[b0 + j]]);
          shard_loss[s] += static_cast<double>(tape.scalar(loss));
          tape.backward(loss);
        }
      });

      double batch_loss = 0.0;
      for (std::size_t s = 0; s < shards; ++s) batch_loss += shard_loss[s];
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite training loss", static_cast<int>(epoch), static_cast<int>(batch_no));
      epoch_loss += batch_loss;

      const float inv = 1.0f / static_cast<float>(n);
      for (std::size_t p = 0; p < grads.size(); ++p) {
        auto& g = grads.at(p).data;
        std::copy(shard_grads[0].at(p).data.begin(), shard_grads[0].at(p).data.end(), g.begin());
        for (std::size_t s = 1; s < shards; ++s) kernels::axpy(g.size(), 1.0f, shard_grads[s].at(p).data.data(), g.data());
        for (auto& x : g) x *= inv;
      }
      for (const char* table : {"text.embedding", "phoneme.embedding"})
        if (grads.contains(table)) {
          auto row = grads[table].row(data::Vocab::kPad);
          std::fill(row.begin(), row.end(), 0.0f);
        }
      if (config.clip_norm > 0) {
        double sq = 0.0;
        for (std::size_t p = 0; p < grads.size(); ++p)
          for (float x : grads.at(p).data) sq += static_cast<double>(x) * x;
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
          const float k = static_cast<float>(config.clip_norm / norm);
          for (std::size_t p = 0; p < grads.size(); ++p)
            for (auto& x : grads.at(p).data) x *= k;
        }
      }
      try {
        adam_step(model.params, grads, adam);
      } catch (const NumericError& e) {
        throw DivergenceError(e.what(), static_cast<int>(epoch), static_cast<int>(batch_no));
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = epoch_loss / static_cast<double>(items.size());
    m.dev_accuracy = accuracy_of(predict_labels(model, dev, config.nbest_n), dev);
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.dev_accuracy > best_acc) {
      best_acc = m.dev_accuracy;
      best_params = model.params;
      result.best_epoch = epoch;
    }
    if (config.stop_at_dev_accuracy > 0 && m.dev_accuracy >= config.stop_at_dev_accuracy) break;
  }

  result.best_dev_accuracy = best_acc;
  result.checkpoint.model = {mc, std::move(best_params)};
  result.checkpoint.text_vocab = std::move(vocab.text);
  result.checkpoint.phoneme_vocab = std::move(vocab.phoneme);
  result.checkpoint.classes = classes;
  auto& meta = result.checkpoint.meta;
  meta["seed"] = seed;
  meta["best_epoch"] = result.best_epoch;
  meta["best_dev_accuracy"] = best_acc;
  meta["nbest_n"] = config.nbest_n;
  meta["train_config"] = config.to_json();
  return result;
}

}  // namespace caslu::train

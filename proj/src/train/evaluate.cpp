#include "caslu/train/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace caslu::train {

std::vector<Bucket> stratify_by_wer(std::span<const double> wers, std::span<const std::size_t> predictions,
                                    std::span<const std::size_t> labels, const std::vector<double>& boundaries) {
  if (wers.size() != predictions.size() || wers.size() != labels.size())
    throw DimensionError("stratify_by_wer: wers, predictions and labels differ in length");
  double prev = 0.0;
  for (double b : boundaries) {
    if (!(b > prev) || !std::isfinite(b))
      throw ContractError("stratify_by_wer: boundaries must be finite, positive and increasing");
    prev = b;
  }
  std::vector<Bucket> buckets(boundaries.size() + 1);
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    buckets[k].lo = k == 0 ? 0.0 : boundaries[k - 1];
    buckets[k].hi = k < boundaries.size() ? boundaries[k] : std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < wers.size(); ++i) {
    if (!(wers[i] >= 0)) throw ContractError("stratify_by_wer: negative or NaN wer at example " + std::to_string(i));
    std::size_t k = 0;
    while (k < boundaries.size() && wers[i] >= boundaries[k]) ++k;
    ++buckets[k].count;
    buckets[k].correct += predictions[i] == labels[i];
  }
  for (auto& b : buckets)
    if (b.count) b.accuracy = static_cast<double>(b.correct) / static_cast<double>(b.count);
  return buckets;
}

FieldReport evaluate_field(const model::Checkpoint& ckpt, const std::vector<data::DatasetExample>& test,
                           InputField field, const data::Lexicon* lexicon, const EvalOptions& options) {
  if (test.empty()) throw ContractError("evaluate: empty test set");
  std::map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < ckpt.classes.size(); ++i) class_index[ckpt.classes[i]] = i;
  const std::size_t nbest_n = options.nbest_n.value_or(ckpt.meta.value("nbest_n", std::size_t{1}));

  std::vector<PreparedExample> prepared(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    prepared[i] = prepare_example(test[i], field, ckpt.model.config, ckpt.text_vocab, ckpt.phoneme_vocab,
                                  class_index, lexicon, nbest_n);

  FieldReport r;
  r.predictions = predict_labels(ckpt.model, prepared, nbest_n);
  r.total = test.size();
  r.confusion.assign(ckpt.classes.size(), std::vector<std::size_t>(ckpt.classes.size(), 0));
  std::vector<double> wers(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    r.labels.push_back(prepared[i].label);
    wers[i] = prepared[i].wer;
    r.correct += r.predictions[i] == prepared[i].label;
    ++r.confusion[prepared[i].label][r.predictions[i]];
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  r.per_seed = {r.accuracy};
  r.buckets = stratify_by_wer(wers, r.predictions, r.labels, options.boundaries);
  return r;
}

EvalReport evaluate(const model::Checkpoint& ckpt, const std::vector<data::DatasetExample>& test,
                    const std::vector<InputField>& fields, const data::Lexicon* lexicon, const EvalOptions& options) {
  EvalReport report;
  report.variant = model::to_string(ckpt.model.config.variant);
  report.classes = ckpt.classes;
  if (ckpt.meta.contains("seed")) report.seeds.push_back(ckpt.meta["seed"].get<std::uint64_t>());
  report.boundaries = options.boundaries;
  for (InputField f : fields) {
    auto& slot = f == InputField::trans ? report.trans : report.asr;
    slot = evaluate_field(ckpt, test, f, lexicon, options);
  }
  return report;
}

namespace {

FieldReport average_field(const std::vector<const FieldReport*>& parts) {
  FieldReport out = *parts.front();
  out.predictions.clear();
  out.labels.clear();
  out.per_seed.clear();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const FieldReport& p = *parts[k];
    if (p.confusion.size() != out.confusion.size() || p.buckets.size() != out.buckets.size())
      throw ContractError("average_reports: reports differ in shape");
    out.total += p.total;
    out.correct += p.correct;
    for (std::size_t i = 0; i < p.confusion.size(); ++i)
      for (std::size_t j = 0; j < p.confusion[i].size(); ++j) out.confusion[i][j] += p.confusion[i][j];
  }
  double sum = 0.0;
  for (const auto* p : parts) {
    out.per_seed.insert(out.per_seed.end(), p->per_seed.begin(), p->per_seed.end());
  }
  for (double a : out.per_seed) sum += a;
  out.accuracy = sum / static_cast<double>(out.per_seed.size());

  for (std::size_t b = 0; b < out.buckets.size(); ++b) {
    Bucket& dst = out.buckets[b];
    dst.count = dst.correct = 0;
    double acc = 0.0;
    std::size_t seen = 0;
    for (const auto* p : parts) {
      const Bucket& src = p->buckets[b];
      if (src.lo != dst.lo || src.hi != dst.hi) throw ContractError("average_reports: bucket boundaries differ");
      dst.count += src.count;
      dst.correct += src.correct;
      if (src.accuracy) {
        acc += *src.accuracy;
        ++seen;
      }
    }
    dst.accuracy = seen ? std::optional<double>(acc / static_cast<double>(seen)) : std::nullopt;
  }
  return out;
}

}  // namespace

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractError("average_reports: no reports");
  EvalReport out = reports.front();
  out.seeds.clear();
  std::vector<const FieldReport*> trans, asr;
  for (const auto& r : reports) {
    if (r.variant != out.variant || r.classes != out.classes)
      throw ContractError("average_reports: reports come from different variants or class sets");
    if (r.trans.has_value() != out.trans.has_value() || r.asr.has_value() != out.asr.has_value())
      throw ContractError("average_reports: reports cover different fields");
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
    if (r.trans) trans.push_back(&*r.trans);
    if (r.asr) asr.push_back(&*r.asr);
  }
  if (!trans.empty()) out.trans = average_field(trans);
  if (!asr.empty()) out.asr = average_field(asr);
  return out;
}

namespace {

nlohmann::ordered_json field_json(const FieldReport& f) {
  nlohmann::ordered_json j;
  j["accuracy"] = f.accuracy;
  j["correct"] = f.correct;
  j["total"] = f.total;
  j["per_seed"] = f.per_seed;
  j["confusion"] = f.confusion;
  auto buckets = nlohmann::ordered_json::array();
  for (const auto& b : f.buckets) {
    nlohmann::ordered_json jb;
    jb["lo"] = b.lo;
    jb["hi"] = std::isinf(b.hi) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(b.hi);
    jb["count"] = b.count;
    jb["correct"] = b.correct;
    jb["accuracy"] = b.accuracy ? nlohmann::ordered_json(*b.accuracy) : nlohmann::ordered_json(nullptr);
    buckets.push_back(jb);
  }
  j["buckets"] = buckets;
  if (!f.predictions.empty()) j["predictions"] = f.predictions;
  return j;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant;
  j["classes"] = classes;
  j["seeds"] = seeds;
  j["boundaries"] = boundaries;
  j["accuracy_trans"] = trans ? nlohmann::ordered_json(trans->accuracy) : nlohmann::ordered_json(nullptr);
  j["accuracy_asr"] = asr ? nlohmann::ordered_json(asr->accuracy) : nlohmann::ordered_json(nullptr);
  if (trans) j["trans"] = field_json(*trans);
  if (asr) j["asr"] = field_json(*asr);
  return j;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::size_t width = 7;
  for (const auto& r : reports) width = std::max(width, r.variant.size());
  auto cell = [](const std::optional<FieldReport>& f) {
    if (!f) return std::string("       -");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * f->accuracy);
    return std::string(buf);
  };
  std::string out = "Variant" + std::string(width - 7, ' ') + "  Trans(%)    ASR(%)\n";
  out += std::string(width + 20, '-') + "\n";
  for (const auto& r : reports)
    out += r.variant + std::string(width - r.variant.size(), ' ') + "  " + cell(r.trans) + "  " + cell(r.asr) + "\n";
  return out;
}

double sign_test_p(std::size_t a_only, std::size_t b_only) {
  const std::size_t n = a_only + b_only;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(a_only, b_only);
  // P(X <= k) for X ~ Binomial(n, 1/2), summed in log space.
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_c = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                         std::lgamma(static_cast<double>(n - i) + 1);
    tail += std::exp(log_c + log_half_n);
  }
  return std::min(1.0, 2.0 * tail);
}

SignTestResult sign_test(std::span<const std::size_t> pred_a, std::span<const std::size_t> pred_b,
                         std::span<const std::size_t> labels) {
  if (pred_a.size() != labels.size() || pred_b.size() != labels.size())
    throw DimensionError("sign_test: prediction and label vectors differ in length");
  SignTestResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a = pred_a[i] == labels[i];
    const bool b = pred_b[i] == labels[i];
    if (a && !b) ++r.a_only;
    if (b && !a) ++r.b_only;
  }
  r.p_value = sign_test_p(r.a_only, r.b_only);
  return r;
}

}  // namespace caslu::train

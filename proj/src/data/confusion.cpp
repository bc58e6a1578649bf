#include "caslu/data/confusion.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "caslu/util/error.hpp"

namespace caslu::data {

using nlohmann::json;

void ConfusionModel::validate() const {
  const std::size_t n = phonemes.size();
  if (n == 0) throw SchemaError("confusion model has no phonemes", 0);
  if (sub.size() != n) throw SchemaError("confusion 'sub' must have one row per phoneme", 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (sub[i].size() != n)
      throw SchemaError("confusion 'sub' row " + std::to_string(i) + " has " + std::to_string(sub[i].size()) +
                            " entries, expected " + std::to_string(n),
                        0);
    double s = 0.0;
    for (double p : sub[i]) {
      if (!(p >= 0.0 && p <= 1.0)) throw SchemaError("confusion 'sub' row " + std::to_string(i) + " has an entry outside [0,1]", 0);
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw SchemaError("confusion 'sub' row for '" + phonemes[i] + "' sums to " + std::to_string(s), 0);
  }
  if (!(p_ins >= 0.0 && p_ins <= 1.0)) throw SchemaError("p_ins must lie in [0,1]", 0);
  if (!(p_del >= 0.0 && p_del <= 1.0)) throw SchemaError("p_del must lie in [0,1]", 0);
  if (index_.size() != n) throw SchemaError("confusion phonemes must be distinct", 0);
}

void ConfusionModel::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < phonemes.size(); ++i) index_.emplace(phonemes[i], static_cast<int>(i));
}

int ConfusionModel::index_of(const std::string& ph) const {
  auto it = index_.find(ph);
  return it == index_.end() ? -1 : it->second;
}

ConfusionModel make_confusion(std::vector<std::string> phonemes, std::vector<std::vector<double>> sub, double p_ins,
                              double p_del) {
  ConfusionModel cm;
  cm.phonemes = std::move(phonemes);
  cm.sub = std::move(sub);
  cm.p_ins = p_ins;
  cm.p_del = p_del;
  cm.reindex();
  cm.validate();
  return cm;
}

ConfusionModel ConfusionModel::identity(std::vector<std::string> phonemes) {
  const std::size_t n = phonemes.size();
  std::vector<std::vector<double>> sub(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) sub[i][i] = 1.0;
  return make_confusion(std::move(phonemes), std::move(sub), 0.0, 0.0);
}

ConfusionModel ConfusionModel::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("confusion JSON: ") + e.what(), 0);
  }
  for (const char* key : {"phonemes", "sub", "p_ins", "p_del"})
    if (!j.contains(key)) throw SchemaError(std::string("confusion JSON missing field '") + key + "'", 0);
  try {
    return make_confusion(j.at("phonemes").get<std::vector<std::string>>(),
                          j.at("sub").get<std::vector<std::vector<double>>>(), j.at("p_ins").get<double>(),
                          j.at("p_del").get<double>());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("confusion JSON: ") + e.what(), 0);
  }
}

ConfusionModel ConfusionModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open confusion model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_text(ss.str());
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

std::string ConfusionModel::to_json_text() const {
  nlohmann::ordered_json j;
  j["phonemes"] = phonemes;
  j["sub"] = sub;
  j["p_ins"] = p_ins;
  j["p_del"] = p_del;
  return j.dump();
}

Tokens corrupt_traced(const Tokens& phonemes, const std::vector<std::size_t>& origin_in, const ConfusionModel& cm,
                      Rng& rng, std::vector<std::size_t>* origin_out) {
  if (origin_out) {
    if (origin_in.size() != phonemes.size()) throw DimensionError("corrupt: origin length differs from input");
    origin_out->clear();
  }
  Tokens out;
  out.reserve(phonemes.size() + 4);
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    const std::size_t src = origin_out ? origin_in[i] : 0;
    if (!rng.bernoulli(cm.p_del)) {
      const int row = cm.index_of(phonemes[i]);
      out.push_back(row < 0 ? phonemes[i] : cm.phonemes[rng.categorical(cm.sub[static_cast<std::size_t>(row)])]);
      if (origin_out) origin_out->push_back(src);
    }
    if (rng.bernoulli(cm.p_ins)) {
      out.push_back(cm.phonemes[rng.index(cm.phonemes.size())]);
      if (origin_out) origin_out->push_back(src);
    }
  }
  return out;
}

Tokens corrupt(const Tokens& phonemes, const ConfusionModel& cm, Rng& rng) {
  return corrupt_traced(phonemes, {}, cm, rng, nullptr);
}

}  // namespace caslu::data

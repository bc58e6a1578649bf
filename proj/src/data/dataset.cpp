#include "caslu/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"

#include "caslu/data/edit_distance.hpp"
#include "caslu/util/error.hpp"

namespace caslu::data {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_json_line(const DatasetExample& ex) {
  ordered_json j;
  j["id"] = ex.id;
  j["text_clean"] = join(ex.text_clean);
  j["text_asr"] = join(ex.text_asr);
  j["phonemes_asr"] = ex.phonemes_asr;
  j["label"] = ex.label;
  j["wer"] = ex.wer;
  if (!ex.nbest.empty()) {
    ordered_json hyps = ordered_json::array();
    for (const auto& h : ex.nbest) {
      ordered_json o;
      o["text"] = join(h.text);
      o["phonemes"] = h.phonemes;
      hyps.push_back(std::move(o));
    }
    j["nbest_asr"] = std::move(hyps);
  }
  return j.dump();
}

namespace {

const json& field(const json& j, const char* name, std::size_t lineno) {
  auto it = j.find(name);
  if (it == j.end()) throw SchemaError(std::string("missing field '") + name + "'", lineno);
  return *it;
}

std::string string_field(const json& j, const char* name, std::size_t lineno) {
  const json& v = field(j, name, lineno);
  if (!v.is_string()) throw SchemaError(std::string("field '") + name + "' must be a string", lineno);
  return v.get<std::string>();
}

Tokens token_list(const json& v, const char* name, std::size_t lineno) {
  if (!v.is_array()) throw SchemaError(std::string("field '") + name + "' must be an array of strings", lineno);
  Tokens out;
  for (const auto& e : v) {
    if (!e.is_string()) throw SchemaError(std::string("field '") + name + "' must be an array of strings", lineno);
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

DatasetExample from_json_line(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what(), lineno);
  }
  if (!j.is_object()) throw SchemaError("record must be a JSON object", lineno);
  DatasetExample ex;
  ex.id = string_field(j, "id", lineno);
  ex.text_clean = split_ws(string_field(j, "text_clean", lineno));
  ex.text_asr = split_ws(string_field(j, "text_asr", lineno));
  ex.phonemes_asr = token_list(field(j, "phonemes_asr", lineno), "phonemes_asr", lineno);
  ex.label = string_field(j, "label", lineno);
  const json& w = field(j, "wer", lineno);
  if (!w.is_number()) throw SchemaError("field 'wer' must be a number", lineno);
  ex.wer = w.get<double>();
  if (!(ex.wer >= 0.0) || !std::isfinite(ex.wer)) throw SchemaError("field 'wer' must be finite and >= 0", lineno);
  if (!ex.text_clean.empty() && std::abs(ex.wer - wer(ex.text_clean, ex.text_asr)) > 1e-9)
    throw SchemaError("field 'wer' disagrees with text_clean/text_asr", lineno);
  if (auto it = j.find("nbest_asr"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("field 'nbest_asr' must be an array", lineno);
    for (const auto& h : *it) {
      if (!h.is_object()) throw SchemaError("field 'nbest_asr' entries must be objects", lineno);
      ex.nbest.push_back({split_ws(string_field(h, "text", lineno)),
                          token_list(field(h, "phonemes", lineno), "phonemes", lineno)});
    }
  }
  return ex;
}

void write_dataset(std::ostream& out, const std::vector<DatasetExample>& examples) {
  for (const auto& ex : examples) out << to_json_line(ex) << '\n';
}

std::vector<DatasetExample> read_dataset(std::istream& in) {
  std::vector<DatasetExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(from_json_line(line, lineno));
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<DatasetExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path + "'");
  write_dataset(out, examples);
  if (!out) throw Error("write failed for '" + path + "'");
}

std::vector<DatasetExample> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  try {
    return read_dataset(in);
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

std::vector<std::string> labels_of(const std::vector<DatasetExample>& examples) {
  std::vector<std::string> out;
  for (const auto& ex : examples)
    if (std::find(out.begin(), out.end(), ex.label) == out.end()) out.push_back(ex.label);
  return out;
}

}  // namespace caslu::data

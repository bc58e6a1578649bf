#include "common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "caslu/util/error.hpp"
#include "caslu/util/rng.hpp"

namespace caslu::cli {

std::string data_path(const std::string& name) { return std::string(CASLU_DATA_DIR) + "/" + name; }

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file", 0, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open for writing", 0, path);
  out << content;
  if (!out) throw SchemaError("write failed", 0, path);
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw SchemaError("'" + csv + "' is not a comma-separated list of numbers");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (double d : parse_doubles(csv)) {
    if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
      throw SchemaError("seed list '" + csv + "' must hold non-negative integers");
    out.push_back(static_cast<std::uint64_t>(d));
  }
  if (out.empty()) throw SchemaError("empty seed list");
  return out;
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "caslu";
  j["version"] = CASLU_VERSION;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = seeds;
  auto in = nlohmann::ordered_json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"fnv1a64", file_digest(p)}});
  j["inputs"] = in;
  j["outputs"] = outputs;
  return j;
}

void RunManifest::write(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }

}  // namespace caslu::cli

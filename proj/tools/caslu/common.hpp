#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caslu/util/error.hpp"
#include "json.hpp"

namespace CLI {
class App;
}

namespace caslu::cli {

inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kInputError = 2;
inline constexpr int kDiverged = 3;

// Path of a file shipped in the data directory.
std::string data_path(const std::string& name);

// Hex FNV-1a 64 of the file contents.
std::string file_digest(const std::string& path);

void write_file(const std::string& path, const std::string& content);

std::vector<double> parse_doubles(const std::string& csv);
std::vector<std::uint64_t> parse_seeds(const std::string& csv);

// Written next to every primary output. Contains no timestamps so identical
// runs produce identical manifests.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  nlohmann::ordered_json to_json() const;
  void write(const std::string& path) const;
};

// Each registers one subcommand whose callback stores its exit code in `rc`.
void add_synth(CLI::App& app, int& rc);
void add_gen_data(CLI::App& app, int& rc);
void add_g2p(CLI::App& app, int& rc);
void add_train(CLI::App& app, int& rc);
void add_eval(CLI::App& app, int& rc);
void add_gradcheck(CLI::App& app, int& rc);
void add_signtest(CLI::App& app, int& rc);

}  // namespace caslu::cli

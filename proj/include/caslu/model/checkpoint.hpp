#pragma once

#include <string>
#include <vector>

#include "caslu/data/vocab.hpp"
#include "caslu/model/model.hpp"

namespace caslu::model {

struct Checkpoint {
  Model<float> model;
  data::Vocab text_vocab;
  data::Vocab phoneme_vocab;
  std::vector<std::string> classes;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();  // free-form training record
};

// Layout: "CASLU1", u64 header length, JSON header, u32 array count, then per
// array u32 name length, name, u32 rank, u64 extents, f32 values. Integers
// and floats are little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace caslu::model

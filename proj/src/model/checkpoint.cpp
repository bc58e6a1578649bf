#include "caslu/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace caslu::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "CASLU1";
constexpr std::size_t kMagicLen = 6;

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw SchemaError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json h;
  h["format"] = 1;
  h["config"] = ckpt.model.config.to_json();
  h["classes"] = ckpt.classes;
  h["text_vocab"] = ckpt.text_vocab.tokens();
  h["phoneme_vocab"] = ckpt.phoneme_vocab.tokens();
  h["meta"] = ckpt.meta;
  const std::string header = h.dump();

  std::string out(kMagic, kMagicLen);
  put<std::uint64_t>(out, header.size());
  out += header;
  const auto& params = ckpt.model.params;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    const auto& t = params.at(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw SchemaError("not a checkpoint (bad magic)");
  Reader r(bytes);
  r.take(kMagicLen);
  const auto header_len = r.get<std::uint64_t>();
  Checkpoint ck;
  try {
    const std::string header(r.take(header_len));
    const auto h = nlohmann::json::parse(header);
    if (h.at("format").get<int>() != 1) throw SchemaError("unsupported checkpoint format");
    ck.model.config = ModelConfig::from_json(h.at("config"));
    ck.classes = h.at("classes").get<std::vector<std::string>>();
    ck.text_vocab = data::Vocab::from_tokens(h.at("text_vocab").get<std::vector<std::string>>());
    ck.phoneme_vocab = data::Vocab::from_tokens(h.at("phoneme_vocab").get<std::vector<std::string>>());
    ck.meta = nlohmann::ordered_json::parse(header).at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.take(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    ad::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    Tensor<float> t(shape);
    r.read_floats(t.data.data(), t.data.size());
    ck.model.params.add(name, std::move(t));
  }
  if (!r.done()) throw SchemaError("trailing bytes after checkpoint arrays");

  // The arrays must be exactly what the header's config would create.
  const auto expected = init_model<float>(ck.model.config, 0);
  if (expected.params.names() != ck.model.params.names())
    throw SchemaError("checkpoint arrays do not match its configuration");
  for (std::size_t i = 0; i < expected.params.size(); ++i)
    if (expected.params.at(i).shape != ck.model.params.at(i).shape)
      throw SchemaError("checkpoint array '" + expected.params.names()[i] + "' has the wrong shape");
  if (ck.classes.size() != ck.model.config.num_classes) throw SchemaError("checkpoint class list size mismatch");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_checkpoint(ss.str());
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

}  // namespace caslu::model

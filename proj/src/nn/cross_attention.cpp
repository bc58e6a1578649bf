#include "caslu/nn/cross_attention.hpp"

#include <cmath>

namespace caslu::nn {

namespace {

std::size_t count_active(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m) n += v != 0;
  return n;
}

}  // namespace

template <typename T>
CorrelationMap correlation_map(Tape<T>& tape, const EncodedSequence& words, const EncodedSequence& phonemes, T eps,
                               bool mask_entries) {
  if (tape.cols(words.hidden) != tape.cols(phonemes.hidden))
    throw DimensionError("correlation_map: word width " + std::to_string(tape.cols(words.hidden)) +
                         " != phoneme width " + std::to_string(tape.cols(phonemes.hidden)));
  Var wn = tape.normalize_rows(words.hidden, eps);
  Var pn = tape.normalize_rows(phonemes.hidden, eps);
  Var c = tape.matmul(wn, tape.transpose(pn));
  if (mask_entries) {
    const std::size_t m = words.mask.size(), n = phonemes.mask.size();
    std::vector<T> outer(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) outer[i * n + j] = (words.mask[i] && phonemes.mask[j]) ? T(1) : T(0);
    c = tape.mul(c, tape.constant(m, n, std::move(outer)));
  }
  return {c, words.mask, phonemes.mask};
}

template <typename T>
Var row_attention(Tape<T>& tape, const CorrelationMap& cm, Var k_text) {
  if (tape.rows(k_text) != tape.cols(cm.c) || tape.cols(k_text) != 1)
    throw DimensionError("row_attention: text kernel must be " + std::to_string(tape.cols(cm.c)) + "x1");
  return tape.masked_softmax(tape.matmul(cm.c, k_text), cm.row_mask);
}

template <typename T>
Var col_attention(Tape<T>& tape, const CorrelationMap& cm, Var k_phoneme) {
  if (tape.rows(k_phoneme) != tape.rows(cm.c) || tape.cols(k_phoneme) != 1)
    throw DimensionError("col_attention: phoneme kernel must be " + std::to_string(tape.rows(cm.c)) + "x1");
  return tape.masked_softmax(tape.matmul(tape.transpose(cm.c), k_phoneme), cm.col_mask);
}

template <typename T>
Var attend_pool(Tape<T>& tape, const EncodedSequence& seq, Var weights) {
  const std::size_t L = tape.rows(seq.hidden);
  if (tape.rows(weights) != L || tape.cols(weights) != 1)
    throw DimensionError("attend_pool: weights must be " + std::to_string(L) + "x1");
  auto w = tape.value(weights);
  double total = 0;
  for (std::size_t i = 0; i < L; ++i) {
    if (w[i] < T(0) || (!seq.mask[i] && w[i] != T(0)))
      throw ContractError("attend_pool: weights are not a simplex over the unmasked rows");
    total += static_cast<double>(w[i]);
  }
  if (std::abs(total - 1.0) > 1e-5)
    throw ContractError("attend_pool: weights sum to " + std::to_string(total) + ", expected 1");
  return tape.matmul(tape.transpose(weights), seq.hidden);
}

template <typename T>
Var uniform_pool(Tape<T>& tape, const EncodedSequence& seq) {
  const std::size_t active = count_active(seq.mask);
  if (active == 0) throw DegenerateMaskError("uniform_pool: every row is masked");
  std::vector<T> w(seq.mask.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = seq.mask[i] ? T(1) / static_cast<T>(active) : T(0);
  const std::size_t L = w.size();
  return attend_pool(tape, seq, tape.constant(L, 1, std::move(w)));
}

nlohmann::ordered_json to_json(const AttentionTrace& trace) {
  nlohmann::ordered_json j;
  j["C"] = trace.correlation;
  j["alpha"] = trace.alpha;
  j["beta"] = trace.beta;
  j["words"] = trace.words;
  j["phonemes"] = trace.phonemes;
  return j;
}

#define CASLU_INSTANTIATE(T)                                                                                   \
  template CorrelationMap correlation_map<T>(Tape<T>&, const EncodedSequence&, const EncodedSequence&, T, bool); \
  template Var row_attention<T>(Tape<T>&, const CorrelationMap&, Var);                                        \
  template Var col_attention<T>(Tape<T>&, const CorrelationMap&, Var);                                        \
  template Var attend_pool<T>(Tape<T>&, const EncodedSequence&, Var);                                         \
  template Var uniform_pool<T>(Tape<T>&, const EncodedSequence&);

CASLU_INSTANTIATE(float)
CASLU_INSTANTIATE(double)

#undef CASLU_INSTANTIATE

}  // namespace caslu::nn

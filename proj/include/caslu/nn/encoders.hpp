#pragma once

// Embedding lookup and the sequence encoder zoo (LSTM, GRU, their
// bidirectional forms, and a same-padded 1-D CNN).
//
// Sequences are padded at the end: a mask is a run of 1s followed by 0s.
// Recurrences only step over the real prefix; padded rows of the output are
// exactly zero and receive no gradient, which is the same as running the full
// padded length with masked states reset to zero.

#include <string>
#include <vector>

#include "caslu/nn/params.hpp"

namespace caslu::nn {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kSepId = 2;

enum class EncoderArch { lstm, gru, bilstm, bigru, cnn };

std::string to_string(EncoderArch arch);
EncoderArch encoder_arch_from_string(const std::string& s);

struct EncoderConfig {
  EncoderArch arch = EncoderArch::bilstm;
  std::size_t input_dim = 128;
  std::size_t hidden = 150;
  std::vector<std::size_t> cnn_widths{3, 4, 5};
  std::size_t cnn_filters = 100;
  std::size_t max_len = 40;
};

// Width D of each hidden row.
std::size_t output_width(const EncoderConfig& cfg);

// Registers `prefix.*` parameters: uniform(-range, range) weights, zero biases.
template <typename T>
void add_encoder_params(ParamSet<T>& params, const std::string& prefix, const EncoderConfig& cfg, Rng& rng,
                        double range);

struct EncodedSequence {
  Var hidden;  // L x D
  Mask mask;   // L
};

// Gate layout: LSTM columns are [i | f | g | o]; GRU columns are [r | z | n].
struct RecurrentWeights {
  Var w_ih;  // d x G*H
  Var w_hh;  // H x G*H
  Var b_ih;  // 1 x G*H
  Var b_hh;  // GRU only
  std::size_t hidden = 0;
};

struct LstmState {
  Var h, c;
};

template <typename T>
RecurrentWeights bind_recurrent(Bound<T>& bound, const std::string& prefix, std::size_t hidden, bool gru);

// One LSTM step on input row x (1 x d).
template <typename T>
LstmState lstm_step(Tape<T>& tape, Var x, LstmState state, const RecurrentWeights& w);

// One GRU step: h' = (1 - z) * h + z * tanh(x W_n + b_n + r * (h U_n + c_n)).
template <typename T>
Var gru_step(Tape<T>& tape, Var x, Var h, const RecurrentWeights& w);

// Number of leading unmasked positions. Throws DegenerateMaskError for an
// all-padding mask and ContractError for a mask that is not a prefix.
std::size_t prefix_length(const Mask& mask);

// Embedded rows (L x d, masked rows zero) -> contextual hidden states.
template <typename T>
EncodedSequence encode(Bound<T>& bound, const std::string& prefix, Var embedded, const Mask& mask,
                       const EncoderConfig& cfg);

}  // namespace caslu::nn

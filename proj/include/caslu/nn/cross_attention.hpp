#pragma once

// Word/phoneme interaction layer: a cosine correlation map between the two
// hidden-state sequences, a single whole-row kernel per side turning rows
// (columns) into attention logits, and attention-weighted pooling.

#include <string>
#include <vector>

#include "caslu/nn/encoders.hpp"
#include "json.hpp"

namespace caslu::nn {

struct CorrelationMap {
  Var c;           // m_max x n_max
  Mask row_mask;   // words
  Mask col_mask;   // phonemes
};

// C_ij = <hw_i, hp_j> / (max(|hw_i|, eps) * max(|hp_j|, eps)); entries with a
// masked word or phoneme are 0. `mask_entries` additionally multiplies C by
// the outer product of the masks (a no-op when padded hidden rows are zero).
template <typename T>
CorrelationMap correlation_map(Tape<T>& tape, const EncodedSequence& words, const EncodedSequence& phonemes, T eps,
                               bool mask_entries = true);

// alpha = masked_softmax(C k_text) over word rows; k_text is n_max x 1.
template <typename T>
Var row_attention(Tape<T>& tape, const CorrelationMap& cm, Var k_text);

// beta = masked_softmax(C^T k_phoneme) over phoneme columns; k_phoneme is m_max x 1.
template <typename T>
Var col_attention(Tape<T>& tape, const CorrelationMap& cm, Var k_phoneme);

// weights^T H -> 1 x D. Weights must form a simplex over H's real rows.
template <typename T>
Var attend_pool(Tape<T>& tape, const EncodedSequence& seq, Var weights);

// Mean of the real rows of H.
template <typename T>
Var uniform_pool(Tape<T>& tape, const EncodedSequence& seq);

// Snapshot of one interaction for inspection.
struct AttentionTrace {
  std::vector<std::vector<double>> correlation;  // real rows x real cols
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<std::string> words;
  std::vector<std::string> phonemes;
};

nlohmann::ordered_json to_json(const AttentionTrace& trace);

}  // namespace caslu::nn

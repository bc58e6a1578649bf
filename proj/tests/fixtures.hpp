#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "caslu/data/dataset.hpp"
#include "caslu/util/rng.hpp"

namespace caslu::testing {

// Per-scalar Adam written from the textbook form (explicit bias-corrected
// moments), independent of the kernels.
struct ScalarAdam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  long t = 0;

  double step(double param, double g) {
    ++t;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double m_hat = m / (1 - std::pow(beta1, static_cast<double>(t)));
    const double v_hat = v / (1 - std::pow(beta2, static_cast<double>(t)));
    return param - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

// "k3" -> k pd e. Digit-free so lexicon parsing keeps the symbols intact.
inline data::Tokens toy_phonemes(const std::string& word) {
  const int n = std::stoi(word.substr(1));
  return {word.substr(0, 1), std::string("p") + static_cast<char>('a' + n), "e"};
}

// CMU-format lexicon covering every toy word.
inline std::string toy_lexicon_text(std::size_t classes) {
  std::string out;
  auto line = [&](const std::string& w) {
    out += w;
    for (auto& p : toy_phonemes(w)) out += " " + p;
    out += "\n";
  };
  for (std::size_t c = 0; c < classes; ++c) line("k" + std::to_string(c));
  for (int f = 0; f < 12; ++f) line("f" + std::to_string(f));
  return out;
}

// Linearly separable toy intent task: every utterance holds its class
// keyword among shared filler words; phonemes are a fixed spelling of each
// word. Classes are balanced.
inline std::vector<data::DatasetExample> separable_task(std::size_t n, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<data::DatasetExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    data::DatasetExample ex;
    ex.id = "toy-" + std::to_string(i);
    const std::size_t label = i % classes;
    ex.label = "class" + std::to_string(label);
    const std::size_t len = 2 + rng.index(5);
    const std::size_t key_at = rng.index(len);
    for (std::size_t k = 0; k < len; ++k) {
      const std::string w = k == key_at ? "k" + std::to_string(label) : "f" + std::to_string(rng.index(12));
      ex.text_clean.push_back(w);
      for (auto& p : toy_phonemes(w)) ex.phonemes_asr.push_back(p);
    }
    ex.text_asr = ex.text_clean;
    out.push_back(ex);
  }
  return out;
}

}  // namespace caslu::testing

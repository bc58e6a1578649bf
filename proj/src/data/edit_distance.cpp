#include "caslu/data/edit_distance.hpp"

#include <algorithm>

#include "caslu/util/error.hpp"

namespace caslu::data {

template <typename Tok>
EditStats edit_distance(std::span<const Tok> ref, std::span<const Tok> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1, at(i, j - 1) + 1});

  EditStats s;
  s.distance = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      --i, --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      ++s.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++s.deletions;
      --i;
    } else {
      ++s.insertions;
      --j;
    }
  }
  return s;
}

template EditStats edit_distance<std::string>(std::span<const std::string>, std::span<const std::string>);
template EditStats edit_distance<char>(std::span<const char>, std::span<const char>);
template EditStats edit_distance<int>(std::span<const int>, std::span<const int>);

EditStats edit_distance(const Tokens& ref, const Tokens& hyp) {
  return edit_distance<std::string>(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

namespace {

double rate(std::size_t dist, std::size_t ref_len, const char* what) {
  if (ref_len == 0) throw ContractError(std::string(what) + ": reference is empty, rate undefined");
  return static_cast<double>(dist) / static_cast<double>(ref_len);
}

std::string chars_of(const Tokens& words) {
  std::string out;
  for (const auto& w : words) out += w;
  return out;
}

}  // namespace

double wer(const Tokens& ref_words, const Tokens& hyp_words) {
  return rate(edit_distance(ref_words, hyp_words).distance, ref_words.size(), "wer");
}

double per(const Tokens& ref_phonemes, const Tokens& hyp_phonemes) {
  return rate(edit_distance(ref_phonemes, hyp_phonemes).distance, ref_phonemes.size(), "per");
}

double cer(const Tokens& ref_words, const Tokens& hyp_words) {
  const std::string r = chars_of(ref_words), h = chars_of(hyp_words);
  return rate(edit_distance<char>(std::span<const char>(r), std::span<const char>(h)).distance, r.size(), "cer");
}

}  // namespace caslu::data

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace caslu::data {

using Tokens = std::vector<std::string>;

// Out-of-vocabulary marker shared by words and phonemes.
inline constexpr const char* kUnkToken = "<unk>";

// Lowercases, turns punctuation (anything but letters, digits and inner
// apostrophes) into spaces, and splits on whitespace.
Tokens tokenize(std::string_view text);

std::string join(const Tokens& tokens, std::string_view sep = " ");

// Splits on whitespace without any normalization.
Tokens split_ws(std::string_view text);

}  // namespace caslu::data

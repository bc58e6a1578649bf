#include "caslu/data/text.hpp"

#include <cctype>

namespace caslu::data {

Tokens split_ws(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Tokens tokenize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char ch = static_cast<unsigned char>(text[i]);
    if (std::isalnum(ch)) {
      cleaned.push_back(static_cast<char>(std::tolower(ch)));
    } else if (ch == '\'' && i > 0 && i + 1 < text.size() && std::isalnum(static_cast<unsigned char>(text[i - 1])) &&
               std::isalnum(static_cast<unsigned char>(text[i + 1]))) {
      cleaned.push_back('\'');
    } else if (ch >= 0x80) {
      // Keep UTF-8 bytes intact; tokens are opaque beyond ASCII.
      cleaned.push_back(static_cast<char>(ch));
    } else {
      cleaned.push_back(' ');
    }
  }
  return split_ws(cleaned);
}

std::string join(const Tokens& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace caslu::data

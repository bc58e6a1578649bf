#include "caslu/data/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "caslu/data/edit_distance.hpp"
#include "caslu/util/error.hpp"

namespace caslu::data {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string strip_stress(const std::string& ph) {
  std::string out;
  for (char c : ph)
    if (!std::isdigit(static_cast<unsigned char>(c))) out.push_back(c);
  return lower(out);
}

// "word(2)" -> "word"
std::string base_word(const std::string& head) {
  if (head.size() > 3 && head.back() == ')') {
    const auto open = head.rfind('(');
    if (open != std::string::npos && open > 0 &&
        std::all_of(head.begin() + static_cast<std::ptrdiff_t>(open) + 1, head.end() - 1,
                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      return head.substr(0, open);
  }
  return head;
}

}  // namespace

Lexicon Lexicon::parse(std::istream& in) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#", 0) == 0 || line.rfind(";;;", 0) == 0) continue;
    const auto hash = line.find(" #");
    if (hash != std::string::npos) line.resize(hash);
    Tokens parts = split_ws(line);
    if (parts.empty()) continue;
    if (parts.size() < 2) throw SchemaError("lexicon entry '" + parts[0] + "' has no phonemes", lineno);
    Pronunciation pron;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      std::string ph = strip_stress(parts[i]);
      if (ph.empty()) throw SchemaError("empty phoneme in entry '" + parts[0] + "'", lineno);
      pron.push_back(std::move(ph));
    }
    lex.add(lower(base_word(parts[0])), std::move(pron));
  }
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon '" + path + "'");
  try {
    return parse(in);
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

void Lexicon::add(const std::string& word, Pronunciation pron) {
  if (pron.empty()) throw ContractError("pronunciation of '" + word + "' is empty");
  auto [it, fresh] = entries_.try_emplace(word);
  if (fresh) order_.push_back(word);
  if (std::find(it->second.begin(), it->second.end(), pron) != it->second.end()) return;
  for (const auto& p : pron) inventory_.insert(p);
  reverse_[pron].insert(word);
  it->second.push_back(std::move(pron));
}

const std::vector<Pronunciation>& Lexicon::pronunciations(const std::string& word) const {
  auto it = entries_.find(word);
  if (it == entries_.end()) throw ContractError("word '" + word + "' not in lexicon");
  return it->second;
}

void Lexicon::count_words(const Tokens& words) {
  for (const auto& w : words) ++freq_[w];
}

std::size_t Lexicon::frequency(const std::string& word) const {
  auto it = freq_.find(word);
  return it == freq_.end() ? 0 : it->second;
}

Tokens g2p_traced(const Tokens& words, const Lexicon& lexicon, std::vector<std::size_t>* origin) {
  Tokens out;
  if (origin) origin->clear();
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (lexicon.contains(words[k])) {
      for (const auto& ph : lexicon.pronunciations(words[k])[0]) {
        out.push_back(ph);
        if (origin) origin->push_back(k);
      }
    } else {
      out.emplace_back(kUnkToken);
      if (origin) origin->push_back(k);
    }
  }
  return out;
}

Tokens g2p(const Tokens& words, const Lexicon& lexicon) { return g2p_traced(words, lexicon, nullptr); }

namespace {

struct Cell {
  std::size_t cost = std::numeric_limits<std::size_t>::max();
  std::size_t from = 0;
  const std::string* word = nullptr;  // null: UNK phoneme
  std::size_t freq = 0;
};

// Strict candidate order at one DP end point.
bool better(std::size_t cost, const std::string* word, std::size_t freq, std::size_t from, const Cell& cur) {
  if (cost != cur.cost) return cost < cur.cost;
  const bool w = word != nullptr, cw = cur.word != nullptr;
  if (w != cw) return w;
  if (w) {
    if (freq != cur.freq) return freq > cur.freq;
    if (*word != *cur.word) return *word < *cur.word;
  }
  return from < cur.from;
}

}  // namespace

Tokens phonemes_to_words(const Tokens& phonemes, const Lexicon& lexicon, std::size_t beam, std::size_t* total_cost) {
  const std::size_t n = phonemes.size();
  if (total_cost) *total_cost = 0;
  if (n == 0) return {};
  std::vector<Cell> best(n + 1);
  best[0].cost = 0;

  struct Entry {
    const std::string* word;
    const Pronunciation* pron;
    std::size_t freq;
  };
  std::vector<Entry> entries;
  for (const auto& [pron, words] : lexicon.reverse_index())
    for (const auto& w : words) entries.push_back({&w, &pron, lexicon.frequency(w)});

  std::vector<std::size_t> prev, cur;
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i].cost == std::numeric_limits<std::size_t>::max()) continue;
    const std::size_t base = best[i].cost;
    {
      Cell& c = best[i + 1];
      if (better(base + 1, nullptr, 0, i, c)) c = {base + 1, i, nullptr, 0};
    }
    for (const auto& e : entries) {
      const std::size_t plen = e.pron->size();
      const std::size_t lo = plen > beam ? plen - beam : 1;
      const std::size_t hi = std::min(plen + beam, n - i);
      if (lo > hi) continue;
      const std::size_t allowed = plen / 2;
      // Row-by-row Levenshtein between the pronunciation and phonemes[i, i+hi);
      // the last row gives the distance for every span length at once.
      prev.resize(hi + 1);
      cur.resize(hi + 1);
      for (std::size_t b = 0; b <= hi; ++b) prev[b] = b;
      for (std::size_t a = 1; a <= plen; ++a) {
        cur[0] = a;
        for (std::size_t b = 1; b <= hi; ++b)
          cur[b] = std::min({prev[b - 1] + ((*e.pron)[a - 1] == phonemes[i + b - 1] ? 0 : 1), prev[b] + 1, cur[b - 1] + 1});
        std::swap(prev, cur);
      }
      for (std::size_t len = lo; len <= hi; ++len) {
        const std::size_t d = prev[len];
        if (d > allowed) continue;
        Cell& c = best[i + len];
        if (better(base + d, e.word, e.freq, i, c)) c = {base + d, i, e.word, e.freq};
      }
    }
  }

  if (total_cost) *total_cost = best[n].cost;
  Tokens out;
  for (std::size_t j = n; j > 0; j = best[j].from) {
    const Cell& c = best[j];
    if (c.word) {
      out.push_back(*c.word);
    } else if (out.empty() || out.back() != kUnkToken) {
      out.emplace_back(kUnkToken);
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace caslu::data

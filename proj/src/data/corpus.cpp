#include "caslu/data/corpus.hpp"

#include <cstdio>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "caslu/data/edit_distance.hpp"
#include "caslu/util/error.hpp"

namespace caslu::data {

namespace {

std::string numbered(const char* prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, k);
  return buf;
}

}  // namespace

std::vector<CleanExample> read_clean_corpus(std::istream& in) {
  std::vector<CleanExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw SchemaError("expected 'label<TAB>text'", lineno);
    CleanExample ex{numbered("utt", lineno), line.substr(tab + 1), line.substr(0, tab)};
    if (ex.label.empty()) throw SchemaError("empty label", lineno);
    if (tokenize(ex.text).empty()) throw SchemaError("empty text", lineno);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<CleanExample> load_clean_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus '" + path + "'");
  try {
    return read_clean_corpus(in);
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

void save_clean_corpus(const std::string& path, const std::vector<CleanExample>& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus '" + path + "'");
  for (const auto& ex : corpus) out << ex.label << '\t' << ex.text << '\n';
}

namespace {

Hypothesis noisy_hypothesis(const Tokens& words, const Tokens& clean_ph, const std::vector<std::size_t>& origin,
                            const Lexicon& lexicon, const ConfusionModel& cm, std::size_t beam, Rng& rng) {
  std::vector<std::size_t> out_origin;
  Hypothesis h;
  h.phonemes = corrupt_traced(clean_ph, origin, cm, rng, &out_origin);

  // Per source word: its clean and corrupted phonemes.
  std::vector<Tokens> before(words.size()), after(words.size());
  for (std::size_t i = 0; i < clean_ph.size(); ++i) before[origin[i]].push_back(clean_ph[i]);
  for (std::size_t i = 0; i < h.phonemes.size(); ++i) after[out_origin[i]].push_back(h.phonemes[i]);

  Tokens run;
  bool in_run = false;
  auto flush = [&] {
    if (!in_run) return;
    for (auto& w : phonemes_to_words(run, lexicon, beam)) h.text.push_back(std::move(w));
    run.clear();
    in_run = false;
  };
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (before[k] == after[k]) {
      flush();
      h.text.push_back(words[k]);
    } else {
      in_run = true;
      run.insert(run.end(), after[k].begin(), after[k].end());
    }
  }
  flush();
  return h;
}

}  // namespace

std::vector<DatasetExample> make_noisy_corpus(const std::vector<CleanExample>& corpus, const Lexicon& lexicon,
                                              const ConfusionModel& cm, const NoisyCorpusConfig& config,
                                              std::uint64_t seed) {
  if (corpus.empty()) throw ContractError("make_noisy_corpus: empty corpus");
  if (config.nbest == 0) throw ContractError("make_noisy_corpus: nbest must be >= 1");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(corpus.size());
  std::vector<DatasetExample> built(corpus.size());
  std::vector<char> keep(corpus.size(), 0);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const CleanExample& src = corpus[static_cast<std::size_t>(i)];
    DatasetExample ex;
    ex.id = src.id;
    ex.label = src.label;
    ex.text_clean = tokenize(src.text);
    if (ex.text_clean.empty()) continue;
    std::vector<std::size_t> origin;
    const Tokens clean_ph = g2p_traced(ex.text_clean, lexicon, &origin);
    Rng rng(seed ^ idx);
    Hypothesis best = noisy_hypothesis(ex.text_clean, clean_ph, origin, lexicon, cm, config.beam, rng);
    ex.text_asr = std::move(best.text);
    ex.phonemes_asr = std::move(best.phonemes);
    ex.wer = wer(ex.text_clean, ex.text_asr);
    for (std::size_t k = 1; k < config.nbest; ++k) {
      Rng alt(derive_seed(seed ^ idx, "nbest", k));
      ex.nbest.push_back(noisy_hypothesis(ex.text_clean, clean_ph, origin, lexicon, cm, config.beam, alt));
    }
    keep[static_cast<std::size_t>(i)] = !config.keep_only_errors || ex.wer > 0.0;
    built[static_cast<std::size_t>(i)] = std::move(ex);
  }

  std::vector<DatasetExample> out;
  for (std::size_t i = 0; i < built.size(); ++i)
    if (keep[i]) out.push_back(std::move(built[i]));
  return out;
}

CorpusSummary summarize(const std::vector<DatasetExample>& examples, const Lexicon& lexicon) {
  CorpusSummary s;
  s.examples = examples.size();
  if (examples.empty()) return s;
  for (const auto& ex : examples) {
    s.mean_wer += ex.wer;
    s.mean_per += per(g2p(ex.text_clean, lexicon), ex.phonemes_asr);
    s.mean_cer += cer(ex.text_clean, ex.text_asr);
  }
  const double n = static_cast<double>(examples.size());
  s.mean_wer /= n;
  s.mean_per /= n;
  s.mean_cer /= n;
  return s;
}

IntentGrammar IntentGrammar::from_json_text(const std::string& text) {
  IntentGrammar g;
  try {
    const auto j = nlohmann::json::parse(text);
    g.intents = j.at("intents").get<std::map<std::string, std::vector<std::string>>>();
    g.slots = j.at("slots").get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("prefixes")) g.prefixes = j["prefixes"].get<std::vector<std::string>>();
    if (j.contains("suffixes")) g.suffixes = j["suffixes"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("grammar JSON: ") + e.what());
  }
  if (g.intents.empty()) throw SchemaError("grammar has no intents");
  for (const auto& [name, templates] : g.intents) {
    if (templates.empty()) throw SchemaError("intent '" + name + "' has no templates");
    for (const auto& t : templates) {
      for (std::size_t p = t.find('{'); p != std::string::npos; p = t.find('{', p + 1)) {
        const auto q = t.find('}', p);
        if (q == std::string::npos) throw SchemaError("unclosed slot in template '" + t + "'");
        const std::string slot = t.substr(p + 1, q - p - 1);
        auto it = g.slots.find(slot);
        if (it == g.slots.end() || it->second.empty())
          throw SchemaError("template '" + t + "' uses undefined slot '" + slot + "'");
      }
    }
  }
  return g;
}

IntentGrammar IntentGrammar::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grammar '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_text(ss.str());
  } catch (const SchemaError& e) {
    throw e.in_file(path);
  }
}

std::vector<std::string> IntentGrammar::classes() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : intents) out.push_back(name);
  return out;
}

std::vector<CleanExample> synthesize(const IntentGrammar& grammar, std::size_t n, std::uint64_t seed) {
  const auto classes = grammar.classes();
  Rng rng(seed);
  std::vector<CleanExample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string& intent = classes[rng.index(classes.size())];
    const auto& templates = grammar.intents.at(intent);
    const std::string& t = templates[rng.index(templates.size())];
    std::string text;
    if (!grammar.prefixes.empty()) text += grammar.prefixes[rng.index(grammar.prefixes.size())] + " ";
    for (std::size_t i = 0; i < t.size();) {
      if (t[i] == '{') {
        const auto q = t.find('}', i);
        const auto& fillers = grammar.slots.at(t.substr(i + 1, q - i - 1));
        text += fillers[rng.index(fillers.size())];
        i = q + 1;
      } else {
        text += t[i++];
      }
    }
    if (!grammar.suffixes.empty()) text += " " + grammar.suffixes[rng.index(grammar.suffixes.size())];
    out.push_back({numbered("syn", k), join(tokenize(text)), intent});
  }
  return out;
}

}  // namespace caslu::data

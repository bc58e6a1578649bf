#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "caslu/data/confusion.hpp"
#include "caslu/data/dataset.hpp"
#include "caslu/data/lexicon.hpp"

namespace caslu::data {

struct CleanExample {
  std::string id;
  std::string text;
  std::string label;
};

// Tab-separated "label<TAB>text" lines; "#" comments and blank lines are
// skipped. Ids are "utt-" plus the zero-padded line number.
std::vector<CleanExample> read_clean_corpus(std::istream& in);
std::vector<CleanExample> load_clean_corpus(const std::string& path);
void save_clean_corpus(const std::string& path, const std::vector<CleanExample>& corpus);

struct NoisyCorpusConfig {
  bool keep_only_errors = true;
  std::size_t nbest = 1;  // hypotheses per utterance, the 1-best included
  std::size_t beam = 1;   // span slack for phonemes_to_words
};

// g2p -> corrupt -> phonemes_to_words per utterance. Words whose phonemes
// came through the channel untouched are kept verbatim; every maximal run
// of touched words is re-segmented from its corrupted phonemes. Example i
// draws from its own generator seeded by `seed` XOR i, so the output does not
// depend on the worker count. Homophone tie-breaks use the lexicon's
// frequencies, which the caller sets.
std::vector<DatasetExample> make_noisy_corpus(const std::vector<CleanExample>& corpus, const Lexicon& lexicon,
                                              const ConfusionModel& cm, const NoisyCorpusConfig& config,
                                              std::uint64_t seed);

struct CorpusSummary {
  std::size_t examples = 0;
  double mean_wer = 0.0;
  double mean_per = 0.0;  // phonemes_asr against g2p(text_clean)
  double mean_cer = 0.0;
};
CorpusSummary summarize(const std::vector<DatasetExample>& examples, const Lexicon& lexicon);

// Template grammar for synthetic intent corpora: intent -> templates with
// "{slot}" holes, slot -> fillers, optional prefixes and suffixes.
struct IntentGrammar {
  std::map<std::string, std::vector<std::string>> intents;
  std::map<std::string, std::vector<std::string>> slots;
  std::vector<std::string> prefixes;
  std::vector<std::string> suffixes;

  static IntentGrammar load(const std::string& path);
  static IntentGrammar from_json_text(const std::string& text);
  std::vector<std::string> classes() const;
};

// Draws `n` utterances with uniformly chosen intent, template, fillers and
// affixes. Ids are "syn-" plus the zero-padded index.
std::vector<CleanExample> synthesize(const IntentGrammar& grammar, std::size_t n, std::uint64_t seed);

}  // namespace caslu::data

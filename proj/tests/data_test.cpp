#include <gtest/gtest.h>
#include <omp.h>

#include <chrono>
#include <functional>
#include <map>
#include <sstream>

#include "caslu/data/corpus.hpp"
#include "caslu/data/edit_distance.hpp"
#include "caslu/data/vocab.hpp"
#include "caslu/util/error.hpp"

namespace caslu::data {
namespace {

const std::string kData = CASLU_DATA_DIR;

const Lexicon& shipped_lexicon() {
  static const Lexicon lex = Lexicon::load(kData + "/lexicon.dict");
  return lex;
}

Lexicon toy_lexicon(const std::string& text) {
  std::istringstream in(text);
  return Lexicon::parse(in);
}

TEST(Text, TokenizeLowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("Play  Blue-Sky, NOW!"), (Tokens{"play", "blue", "sky", "now"}));
  EXPECT_EQ(tokenize("don't 'quote'"), (Tokens{"don't", "quote"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Lexicon, ParsesCmuConventions) {
  auto lex = toy_lexicon(";;; comment\n# another\nREAD  R IY1 D\nREAD(2)  R EH1 D\nA AH0\n");
  ASSERT_EQ(lex.pronunciations("read").size(), 2u);
  EXPECT_EQ(lex.pronunciations("read")[1], (Pronunciation{"r", "eh", "d"}));
  EXPECT_EQ(lex.inventory(), (std::set<std::string>{"r", "iy", "d", "eh", "ah"}));
  EXPECT_EQ(lex.reverse_index().at({"ah"}), (std::set<std::string>{"a"}));
  EXPECT_THROW(toy_lexicon("ok OW K\nbroken\n"), SchemaError);
  try {
    toy_lexicon("ok OW K\nbroken\n");
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Lexicon, ShippedDictionaryIsConsistent) {
  const auto& lex = shipped_lexicon();
  EXPECT_GT(lex.size(), 500u);
  EXPECT_EQ(lex.inventory().size(), 38u);
  for (const auto& w : lex.words())
    for (const auto& p : lex.pronunciations(w)) {
      ASSERT_FALSE(p.empty());
      for (const auto& ph : p) ASSERT_TRUE(lex.inventory().count(ph));
      ASSERT_TRUE(lex.reverse_index().at(p).count(w));
    }
}

TEST(G2p, FirstPronunciationAndUnknowns) {
  const auto& lex = shipped_lexicon();
  EXPECT_EQ(g2p({"add"}, lex), (Tokens{"ae", "d"}));
  EXPECT_EQ(g2p({"had"}, lex), (Tokens{"hh", "ae", "d"}));
  EXPECT_EQ(g2p({"i", "want", "to", "add", "a", "song"}, lex),
            (Tokens{"ay", "w", "aa", "n", "t", "t", "uw", "ae", "d", "ah", "s", "ao", "ng"}));
  EXPECT_TRUE(g2p({}, lex).empty());
  EXPECT_EQ(g2p({"zzyzx"}, lex), (Tokens{kUnkToken}));
}

// Minimum segmentation cost by exhaustive recursion over every split.
std::size_t brute_cost(const Tokens& ph, std::size_t end, const Lexicon& lex, std::size_t beam) {
  if (end == 0) return 0;
  std::size_t best = brute_cost(ph, end - 1, lex, beam) + 1;
  for (const auto& [pron, ws] : lex.reverse_index())
    for (std::size_t len = 1; len <= end; ++len) {
      if (len + beam < pron.size() || len > pron.size() + beam) continue;
      Tokens span(ph.begin() + static_cast<std::ptrdiff_t>(end - len), ph.begin() + static_cast<std::ptrdiff_t>(end));
      const auto d = edit_distance(pron, span).distance;
      if (d <= pron.size() / 2) best = std::min(best, brute_cost(ph, end - len, lex, beam) + d);
    }
  return best;
}

TEST(PhonemesToWords, HomophoneFollowsFrequency) {
  auto lex = toy_lexicon("by B AY\nbuy B AY\na AH\ncomputer K AH M P Y UW T ER\nbike B AY K\n");
  lex.set_frequencies({{"by", 10}, {"buy", 3}});
  EXPECT_EQ(phonemes_to_words({"b", "ay"}, lex, 1), (Tokens{"by"}));
  lex.set_frequencies({{"by", 1}, {"buy", 3}});
  EXPECT_EQ(phonemes_to_words({"b", "ay"}, lex, 1), (Tokens{"buy"}));
  lex.set_frequencies({});
  EXPECT_EQ(phonemes_to_words({"b", "ay"}, lex, 1), (Tokens{"buy"}));  // lexicographic
  EXPECT_TRUE(phonemes_to_words({}, lex, 1).empty());
}

TEST(PhonemesToWords, CostMatchesExhaustiveOracle) {
  auto lex = toy_lexicon("by B AY\nbuy B AY\na AH\ncomputer K AH M P Y UW T ER\nbike B AY K\n");
  lex.set_frequencies({{"by", 10}, {"buy", 3}, {"a", 7}});
  Rng rng(5);
  const Tokens alphabet{"b", "ay", "ah", "k", "m", "zh"};
  for (int trial = 0; trial < 200; ++trial) {
    Tokens ph;
    for (std::size_t i = 0, n = 1 + rng.index(6); i < n; ++i) ph.push_back(alphabet[rng.index(alphabet.size())]);
    std::size_t cost = 0;
    auto words = phonemes_to_words(ph, lex, 1, &cost);
    EXPECT_EQ(cost, brute_cost(ph, ph.size(), lex, 1)) << join(ph);
    EXPECT_FALSE(words.empty());
  }
  std::size_t cost = 0;
  EXPECT_EQ(phonemes_to_words({"b"}, lex, 1, &cost), (Tokens{"by"}));  // word beats UNK at equal cost
  EXPECT_EQ(cost, 1u);
}

TEST(PhonemesToWords, RoundTripOnUnambiguousLexicon) {
  auto lex = toy_lexicon("play P L EY\nsome S AH M\njazz JH AE Z\nnow N AW\n");
  Tokens words{"play", "some", "jazz", "now"};
  EXPECT_EQ(phonemes_to_words(g2p(words, lex), lex, 1), words);
  EXPECT_EQ(phonemes_to_words({"zh", "zh"}, lex, 1), (Tokens{kUnkToken}));
}

TEST(Confusion, ShippedModelValidates) {
  auto cm = ConfusionModel::load(kData + "/confusion.json");
  EXPECT_EQ(cm.phonemes.size(), 38u);
  for (const auto& ph : shipped_lexicon().inventory()) EXPECT_GE(cm.index_of(ph), 0) << ph;
  EXPECT_THROW(ConfusionModel::from_json_text(R"({"phonemes":["a","b"],"sub":[[0.5,0.4],[0,1]],"p_ins":0,"p_del":0})"),
               SchemaError);
  EXPECT_THROW(ConfusionModel::from_json_text(R"({"phonemes":["a"],"sub":[[1]],"p_ins":2,"p_del":0})"), SchemaError);
  EXPECT_THROW(ConfusionModel::from_json_text(R"({"phonemes":["a"],"sub":[[1]],"p_del":0})"), SchemaError);
}

TEST(Corrupt, EdgeCases) {
  auto ident = ConfusionModel::identity({"a", "b", "c"});
  Rng rng(1);
  Tokens in{"a", "b", "c", "a", "x"};
  EXPECT_EQ(corrupt(in, ident, rng), in);
  auto del = make_confusion({"a", "b"}, {{1, 0}, {0, 1}}, 0.0, 1.0);
  EXPECT_TRUE(corrupt(in, del, rng).empty());
  EXPECT_TRUE(corrupt({}, ident, rng).empty());
}

TEST(Corrupt, SubstitutionRateMonteCarlo) {
  // 0.1 off-diagonal mass spread over the other two phonemes.
  auto cm = make_confusion({"a", "b", "c"}, {{0.9, 0.05, 0.05}, {0.05, 0.9, 0.05}, {0.05, 0.05, 0.9}}, 0.0, 0.0);
  Rng rng(7);
  Tokens in(100000, "b");
  auto out = corrupt(in, cm, rng);
  ASSERT_EQ(out.size(), in.size());
  std::size_t subs = 0;
  for (const auto& p : out) subs += p != "b";
  EXPECT_NEAR(static_cast<double>(subs) / 1e5, 0.1, 0.01);
}

TEST(Corrupt, RatesAndDeterminism) {
  auto cm = make_confusion({"a", "b"}, {{1, 0}, {0, 1}}, 0.2, 0.3);
  Tokens in(50000, "a");
  Rng r1(3), r2(3), r3(4);
  auto o1 = corrupt(in, cm, r1);
  EXPECT_EQ(o1, corrupt(in, cm, r2));
  auto o3 = corrupt(in, cm, r3);
  EXPECT_NE(o1, o3);
  // Expected length n * ((1 - p_del) + p_ins).
  for (const auto* o : {&o1, &o3}) EXPECT_NEAR(static_cast<double>(o->size()) / 5e4, 0.9, 0.01);
}

std::size_t oracle_distance(const std::string& a, const std::string& b, std::size_t i, std::size_t j,
                            std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  auto key = std::make_pair(i, j);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  std::size_t best = std::min(oracle_distance(a, b, i + 1, j, memo), oracle_distance(a, b, i, j + 1, memo)) + 1;
  best = std::min(best, oracle_distance(a, b, i + 1, j + 1, memo) + (a[i] != b[j]));
  return memo[key] = best;
}

TEST(EditDistance, ExhaustiveAgainstRecursiveOracle) {
  std::vector<std::string> all{""};
  for (std::size_t len = 1, start = 0; len <= 6; ++len) {
    const std::size_t end = all.size();
    for (std::size_t k = start; k < end; ++k)
      for (char ch : {'a', 'b', 'c'}) all.push_back(all[k] + ch);
    start = end;
  }
  ASSERT_EQ(all.size(), 1093u);
  for (const auto& a : all)
    for (const auto& b : all) {
      std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
      const auto s = edit_distance<char>(std::span<const char>(a), std::span<const char>(b));
      ASSERT_EQ(s.distance, oracle_distance(a, b, 0, 0, memo)) << a << " / " << b;
      ASSERT_EQ(s.substitutions + s.insertions + s.deletions, s.distance);
      ASSERT_EQ(static_cast<long>(s.insertions) - static_cast<long>(s.deletions),
                static_cast<long>(b.size()) - static_cast<long>(a.size()));
    }
}

TEST(EditDistance, ExamplesAndRates) {
  auto s = edit_distance({"buy", "a", "computer"}, {"by", "a", "computer"});
  EXPECT_EQ(s.distance, 1u);
  EXPECT_EQ(s.substitutions, 1u);
  EXPECT_DOUBLE_EQ(wer({"buy", "a", "computer"}, {"by", "a", "computer"}), 1.0 / 3.0);
  EXPECT_EQ(wer({"a", "b"}, {"a", "b"}), 0.0);
  EXPECT_EQ(wer({"a", "b", "c", "d"}, {}), 1.0);
  EXPECT_THROW(wer({}, {"a"}), ContractError);
  // ab -> ba: two substitutions preferred over insert + delete.
  auto sw = edit_distance({"a", "b"}, {"b", "a"});
  EXPECT_EQ(sw.substitutions, 2u);
  EXPECT_DOUBLE_EQ(cer({"buy"}, {"by"}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(per({"b", "ay"}, {"b", "ay"}), 0.0);
}

TEST(EditDistance, SymmetryAndTriangle) {
  Rng rng(17);
  auto draw = [&] {
    Tokens t;
    for (std::size_t i = 0, n = rng.index(8); i < n; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.index(4))));
    return t;
  };
  for (int k = 0; k < 2000; ++k) {
    auto a = draw(), b = draw(), c = draw();
    const auto ab = edit_distance(a, b).distance;
    ASSERT_EQ(ab, edit_distance(b, a).distance);
    ASSERT_LE(edit_distance(a, c).distance, ab + edit_distance(b, c).distance);
  }
}

TEST(Vocab, FrequencyThenLexicographic) {
  auto v = build_vocab({{"a", "b", "a"}}, 1);
  EXPECT_EQ(v.id("a"), 3);
  EXPECT_EQ(v.id("b"), 4);
  EXPECT_EQ(v.id("<pad>"), Vocab::kPad);
  EXPECT_EQ(v.id("<sep>"), Vocab::kSep);
  EXPECT_EQ(v.id("unseen"), Vocab::kUnk);
  auto tie = build_vocab({{"z", "y", "x"}}, 1);
  EXPECT_EQ(tie.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "<sep>", "x", "y", "z"}));
  auto none = build_vocab({{"a", "b", "a"}}, 5);
  EXPECT_EQ(none.size(), 3u);
  EXPECT_EQ(none.encode({"a", "b"}), (std::vector<int>{1, 1}));
  EXPECT_THROW(build_vocab({}, 1), ContractError);
  EXPECT_EQ(Vocab::from_tokens(v.tokens()), v);
}

DatasetExample sample_example() {
  DatasetExample ex;
  ex.id = "utt-1";
  ex.text_clean = {"buy", "a", "computer"};
  ex.text_asr = {"by", "a", "computer"};
  ex.phonemes_asr = {"b", "ay", "ah"};
  ex.label = "shop";
  ex.wer = 1.0 / 3.0;
  return ex;
}

TEST(Dataset, RoundTripAndFieldOrder) {
  auto a = sample_example();
  auto b = sample_example();
  b.id = "utt-2";
  b.nbest = {{{"bye", "a"}, {"b", "ay", "ah"}}};
  std::stringstream ss;
  write_dataset(ss, {a, b});
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            R"({"id":"utt-1","text_clean":"buy a computer","text_asr":"by a computer","phonemes_asr":["b","ay","ah"],"label":"shop","wer":0.3333333333333333})");
  auto back = read_dataset(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
}

TEST(Dataset, SchemaErrorsNameFieldAndLine) {
  std::stringstream ss;
  ss << to_json_line(sample_example()) << "\n"
     << R"({"id":"x","text_clean":"a","text_asr":"a","phonemes_asr":[],"wer":0})" << "\n";
  try {
    read_dataset(ss);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("'label'"), std::string::npos);
  }
  std::stringstream bad("{not json\n");
  EXPECT_THROW(read_dataset(bad), SchemaError);
  std::stringstream wrong_wer(R"({"id":"x","text_clean":"a b","text_asr":"a","phonemes_asr":[],"label":"l","wer":0})");
  EXPECT_THROW(read_dataset(wrong_wer), SchemaError);
}

TEST(Dataset, TableOneSizedCorpusLoadsQuickly) {
  const std::string path = ::testing::TempDir() + "/big.jsonl";
  std::vector<DatasetExample> many(11769, sample_example());
  for (std::size_t i = 0; i < many.size(); ++i) many[i].id = "utt-" + std::to_string(i);
  save_dataset(path, many);
  const auto t0 = std::chrono::steady_clock::now();
  auto back = load_dataset(path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(back.size(), 11769u);
  EXPECT_LT(secs, 5.0);
}

std::vector<CleanExample> synthetic_corpus(std::size_t n, std::uint64_t seed) {
  return synthesize(IntentGrammar::load(kData + "/intent_grammar.json"), n, seed);
}

Lexicon counted_lexicon(const std::vector<CleanExample>& corpus) {
  Lexicon lex = shipped_lexicon();
  for (const auto& ex : corpus) lex.count_words(tokenize(ex.text));
  return lex;
}

TEST(Synth, DeterministicAndCoveredByLexicon) {
  auto g = IntentGrammar::load(kData + "/intent_grammar.json");
  EXPECT_EQ(g.classes().size(), 7u);
  auto a = synthesize(g, 300, 9), b = synthesize(g, 300, 9);
  ASSERT_EQ(a.size(), 300u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    for (const auto& w : tokenize(a[i].text)) EXPECT_TRUE(shipped_lexicon().contains(w)) << w;
  }
  EXPECT_THROW(IntentGrammar::from_json_text(R"({"intents":{"x":["{nope}"]},"slots":{}})"), SchemaError);
}

TEST(CleanCorpus, TsvRoundTrip) {
  std::stringstream ss("# header\nplay\tplay some jazz\n\nweather\twill it rain\n");
  auto c = read_clean_corpus(ss);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1].label, "weather");
  EXPECT_EQ(c[1].id, "utt-000004");
  std::stringstream bad("no tab here\n");
  EXPECT_THROW(read_clean_corpus(bad), SchemaError);
}

TEST(NoisyCorpus, KeepOnlyErrorsAndZeroNoise) {
  auto corpus = synthetic_corpus(400, 3);
  auto lex = counted_lexicon(corpus);
  auto cm = ConfusionModel::load(kData + "/confusion.json");
  auto noisy = make_noisy_corpus(corpus, lex, cm, {}, 11);
  EXPECT_GT(noisy.size(), 100u);
  for (const auto& ex : noisy) {
    EXPECT_GT(ex.wer, 0.0);
    EXPECT_DOUBLE_EQ(ex.wer, wer(ex.text_clean, ex.text_asr));
  }
  auto quiet = ConfusionModel::identity(cm.phonemes);
  EXPECT_TRUE(make_noisy_corpus(corpus, lex, quiet, {}, 11).empty());
  NoisyCorpusConfig keep_all;
  keep_all.keep_only_errors = false;
  auto all = make_noisy_corpus(corpus, lex, quiet, keep_all, 11);
  ASSERT_EQ(all.size(), corpus.size());
  for (const auto& ex : all) EXPECT_EQ(ex.text_asr, ex.text_clean);
  EXPECT_THROW(make_noisy_corpus({}, lex, cm, {}, 1), ContractError);
}

TEST(NoisyCorpus, DeterministicAcrossRunsAndThreads) {
  auto corpus = synthetic_corpus(300, 4);
  auto lex = counted_lexicon(corpus);
  auto cm = ConfusionModel::load(kData + "/confusion.json");
  NoisyCorpusConfig cfg;
  cfg.nbest = 3;
  auto dump = [&](int threads) {
    omp_set_num_threads(threads);
    std::stringstream ss;
    write_dataset(ss, make_noisy_corpus(corpus, lex, cm, cfg, 99));
    return ss.str();
  };
  const std::string one = dump(1);
  EXPECT_EQ(one, dump(1));
  EXPECT_EQ(one, dump(4));
  omp_set_num_threads(1);
}

TEST(NoisyCorpus, PhonemeErrorRateBelowWordErrorRate) {
  auto corpus = synthetic_corpus(1000, 5);
  auto lex = counted_lexicon(corpus);
  auto noisy = make_noisy_corpus(corpus, lex, ConfusionModel::load(kData + "/confusion.json"), {}, 5);
  auto s = summarize(noisy, lex);
  EXPECT_GT(s.mean_per, 0.0);
  EXPECT_LE(s.mean_per, s.mean_wer);
}

}  // namespace
}  // namespace caslu::data

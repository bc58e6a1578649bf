#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "caslu/data/corpus.hpp"
#include "caslu/data/text.hpp"
#include "common.hpp"

namespace caslu::cli {

namespace {

std::string stem(const std::string& path) {
  const std::string ext = ".jsonl";
  if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0)
    return path.substr(0, path.size() - ext.size());
  return path;
}

}  // namespace

void add_synth(CLI::App& app, int& rc) {
  struct Opts {
    std::string grammar = data_path("intent_grammar.json");
    std::size_t n = 0;
    std::uint64_t seed = 1;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("synth", "Generate a clean TSV corpus from an intent grammar");
  cmd->add_option("--grammar", o->grammar, "Grammar JSON")->capture_default_str();
  cmd->add_option("--n", o->n, "Number of utterances")->required();
  cmd->add_option("--seed", o->seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", o->out, "Output TSV (label<TAB>text)")->required();
  cmd->callback([o, &rc] {
    const auto grammar = data::IntentGrammar::load(o->grammar);
    const auto corpus = data::synthesize(grammar, o->n, o->seed);
    data::save_clean_corpus(o->out, corpus);
    RunManifest m;
    m.command = "synth";
    m.config = {{"grammar", o->grammar}, {"n", o->n}};
    m.seeds = {o->seed};
    m.inputs = {o->grammar};
    m.outputs = {o->out};
    m.write(o->out + ".manifest.json");
    std::printf("wrote %zu utterances over %zu intents to %s\n", corpus.size(), grammar.classes().size(),
                o->out.c_str());
    rc = kOk;
  });
}

void add_gen_data(CLI::App& app, int& rc) {
  struct Opts {
    std::string corpus;
    std::string lexicon = data_path("lexicon.dict");
    std::string confusion = data_path("confusion.json");
    std::uint64_t seed = 1;
    bool keep_only_errors = true;
    std::size_t nbest = 1;
    std::size_t beam = 1;
    std::string split;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gen-data", "Pass a clean corpus through the phonetic noise channel");
  cmd->add_option("--corpus", o->corpus, "Clean TSV corpus (label<TAB>text)")->required();
  cmd->add_option("--lexicon", o->lexicon, "Pronunciation lexicon")->capture_default_str();
  cmd->add_option("--confusion", o->confusion, "Confusion model JSON")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Random seed")->capture_default_str();
  cmd->add_flag("--keep-only-errors,!--keep-all", o->keep_only_errors,
                "Drop utterances whose 1-best equals the transcription (default on)");
  cmd->add_option("--nbest", o->nbest, "Hypotheses per utterance, 1-best included")->capture_default_str();
  cmd->add_option("--beam", o->beam, "Span slack when re-segmenting phonemes into words")->capture_default_str();
  cmd->add_option("--split", o->split, "TRAIN,DEV,TEST sizes; also writes <out>.{train,dev,test}.jsonl");
  cmd->add_option("--out", o->out, "Output JSONL")->required();
  cmd->callback([o, &rc] {
    std::vector<std::size_t> sizes;
    if (!o->split.empty()) {
      for (double d : parse_doubles(o->split)) {
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
          throw SchemaError("--split expects three non-negative integers");
        sizes.push_back(static_cast<std::size_t>(d));
      }
      if (sizes.size() != 3) throw SchemaError("--split expects TRAIN,DEV,TEST");
    }
    const auto corpus = data::load_clean_corpus(o->corpus);
    auto lexicon = data::Lexicon::load(o->lexicon);
    for (const auto& ex : corpus) lexicon.count_words(data::tokenize(ex.text));
    const auto cm = data::ConfusionModel::load(o->confusion);
    data::NoisyCorpusConfig cfg;
    cfg.keep_only_errors = o->keep_only_errors;
    cfg.nbest = o->nbest;
    cfg.beam = o->beam;
    const auto noisy = data::make_noisy_corpus(corpus, lexicon, cm, cfg, o->seed);

    RunManifest m;
    m.command = "gen-data";
    m.config = {{"corpus", o->corpus},   {"lexicon", o->lexicon}, {"confusion", o->confusion},
                {"keep_only_errors", o->keep_only_errors}, {"nbest", o->nbest}, {"beam", o->beam},
                {"split", o->split}};
    m.seeds = {o->seed};
    m.inputs = {o->corpus, o->lexicon, o->confusion};
    data::save_dataset(o->out, noisy);
    m.outputs.push_back(o->out);
    if (!sizes.empty()) {
      if (sizes[0] + sizes[1] + sizes[2] > noisy.size())
        throw SchemaError("--split asks for " + std::to_string(sizes[0] + sizes[1] + sizes[2]) +
                          " examples but the corpus has " + std::to_string(noisy.size()));
      std::size_t at = 0;
      const char* names[] = {"train", "dev", "test"};
      for (int k = 0; k < 3; ++k) {
        std::vector<data::DatasetExample> part(noisy.begin() + static_cast<std::ptrdiff_t>(at),
                                               noisy.begin() + static_cast<std::ptrdiff_t>(at + sizes[k]));
        at += sizes[k];
        const std::string path = stem(o->out) + "." + names[k] + ".jsonl";
        data::save_dataset(path, part);
        m.outputs.push_back(path);
      }
    }
    m.write(o->out + ".manifest.json");

    if (noisy.empty()) {
      std::fprintf(stderr, "warning: the corpus is empty (no utterance picked up an ASR error)\n");
      std::printf("examples 0\n");
    } else {
      const auto s = data::summarize(noisy, lexicon);
      std::printf("examples %zu of %zu\nmean WER %.4f\nmean PER %.4f\nmean CER %.4f\n", s.examples, corpus.size(),
                  s.mean_wer, s.mean_per, s.mean_cer);
    }
    rc = kOk;
  });
}

void add_g2p(CLI::App& app, int& rc) {
  struct Opts {
    std::string lexicon = data_path("lexicon.dict");
    std::vector<std::string> words;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("g2p", "Print lexicon phonemes of text (arguments, or stdin lines)");
  cmd->add_option("--lexicon", o->lexicon, "Pronunciation lexicon")->capture_default_str();
  cmd->add_option("text", o->words, "Words to convert; reads stdin when absent");
  cmd->callback([o, &rc] {
    const auto lexicon = data::Lexicon::load(o->lexicon);
    auto convert = [&](const std::string& line) {
      std::printf("%s\n", data::join(data::g2p(data::tokenize(line), lexicon)).c_str());
    };
    if (!o->words.empty()) {
      convert(data::join(o->words));
    } else {
      std::string line;
      while (std::getline(std::cin, line)) convert(line);
    }
    rc = kOk;
  });
}

}  // namespace caslu::cli

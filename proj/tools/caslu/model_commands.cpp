#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "caslu/model/gradcheck.hpp"
#include "caslu/train/evaluate.hpp"
#include "common.hpp"

namespace caslu::cli {

using model::InputField;
using model::Variant;

namespace {

bool needs_lexicon(Variant v, bool trans_field) {
  return model::uses_phonemes(v) && (trans_field || v == Variant::caslu_vat);
}

}  // namespace

void add_train(CLI::App& app, int& rc) {
  struct Opts {
    std::string config, train, dev, variant, seeds, out;
    std::string lexicon = data_path("lexicon.dict");
    std::vector<std::string> sets;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("train", "Train one model per seed and report dev accuracy");
  cmd->add_option("--config", o->config, "Flat key = value config file");
  cmd->add_option("--train", o->train, "Training JSONL")->required();
  cmd->add_option("--dev", o->dev, "Dev JSONL (model selection)")->required();
  cmd->add_option("--variant", o->variant, "Variant tag (overrides the config)");
  cmd->add_option("--seeds", o->seeds, "Comma-separated seeds (overrides the config)");
  cmd->add_option("--set", o->sets, "KEY=VALUE config override, repeatable");
  cmd->add_option("--lexicon", o->lexicon, "Lexicon (read only by variants needing transcription phonemes)")
      ->capture_default_str();
  cmd->add_option("--out", o->out, "Output directory")->required();
  cmd->callback([o, &rc] {
    train::TrainConfig cfg = o->config.empty() ? train::TrainConfig{} : train::load_config(o->config);
    for (const auto& kv : o->sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw SchemaError("--set expects KEY=VALUE, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o->variant.empty()) cfg.set("variant", o->variant);
    if (!o->seeds.empty()) cfg.seeds = parse_seeds(o->seeds);
    try {
      cfg.validate();
    } catch (const ContractError& e) {
      throw SchemaError(e.what());
    }

    const auto train_set = data::load_dataset(o->train);
    const auto dev_set = data::load_dataset(o->dev);
    std::optional<data::Lexicon> lexicon;
    RunManifest m;
    m.command = "train";
    m.inputs = {o->train, o->dev};
    if (!o->config.empty()) m.inputs.push_back(o->config);
    if (needs_lexicon(cfg.variant, false)) {
      lexicon = data::Lexicon::load(o->lexicon);
      m.inputs.push_back(o->lexicon);
    }
    std::filesystem::create_directories(o->out);

    std::vector<train::EvalReport> reports;
    for (std::uint64_t seed : cfg.seeds) {
      const std::string base = o->out + "/seed-" + std::to_string(seed);
      std::ofstream metrics(base + ".metrics.jsonl");
      if (!metrics) throw SchemaError("cannot open for writing", 0, base + ".metrics.jsonl");
      auto result = train::train(cfg, seed, train_set, dev_set, lexicon ? &*lexicon : nullptr,
                                 [&](const train::EpochMetrics& e) {
                                   nlohmann::ordered_json j;
                                   j["seed"] = seed;
                                   j["epoch"] = e.epoch;
                                   j["train_loss"] = e.train_loss;
                                   j["dev_accuracy"] = e.dev_accuracy;
                                   metrics << j.dump() << "\n";
                                   std::fprintf(stderr, "seed %llu epoch %zu loss %.4f dev %.4f\n",
                                                static_cast<unsigned long long>(seed), e.epoch, e.train_loss,
                                                e.dev_accuracy);
                                 });
      model::save_checkpoint(base + ".ckpt", result.checkpoint);
      m.outputs.push_back(base + ".ckpt");
      m.outputs.push_back(base + ".metrics.jsonl");
      reports.push_back(train::evaluate(result.checkpoint, dev_set, {model::training_field(cfg.variant)},
                                        lexicon ? &*lexicon : nullptr));
    }
    const auto avg = train::average_reports(reports);
    write_file(o->out + "/report.json", avg.to_json().dump(2) + "\n");
    m.outputs.push_back(o->out + "/report.json");
    m.config = cfg.to_json();
    m.seeds = cfg.seeds;
    m.write(o->out + "/manifest.json");
    std::printf("dev accuracy, mean over %zu seed(s)\n%s", cfg.seeds.size(), train::render_table({avg}).c_str());
    rc = kOk;
  });
}

void add_eval(CLI::App& app, int& rc) {
  struct Opts {
    std::vector<std::string> ckpts;
    std::string test, field = "both", stratify = "0.3,0.6", trace, trace_out, out, preds;
    std::string lexicon = data_path("lexicon.dict");
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("eval", "Evaluate checkpoints; several are averaged as seeds");
  cmd->add_option("--ckpt", o->ckpts, "Checkpoint, repeatable")->required();
  cmd->add_option("--test", o->test, "Test JSONL")->required();
  cmd->add_option("--field", o->field, "trans, asr or both")->capture_default_str();
  cmd->add_option("--stratify", o->stratify, "WER bucket boundaries")->capture_default_str();
  cmd->add_option("--trace", o->trace, "Example id whose attention trace is written");
  cmd->add_option("--trace-out", o->trace_out, "Trace JSON path (stdout when absent)");
  cmd->add_option("--lexicon", o->lexicon, "Lexicon for transcription phonemes")->capture_default_str();
  cmd->add_option("--out", o->out, "Report JSON path (stdout when absent)");
  cmd->add_option("--preds", o->preds, "Write id<TAB>predicted label (single checkpoint; asr field when both)");
  cmd->callback([o, &rc] {
    std::vector<InputField> fields;
    if (o->field == "both") fields = {InputField::trans, InputField::asr};
    else fields = {model::field_from_string(o->field)};
    train::EvalOptions opts;
    opts.boundaries = parse_doubles(o->stratify);
    if (!o->preds.empty() && o->ckpts.size() != 1) throw SchemaError("--preds needs exactly one --ckpt");

    const auto test = data::load_dataset(o->test);
    RunManifest m;
    m.command = "eval";
    m.config = {{"field", o->field}, {"stratify", o->stratify}, {"trace", o->trace}};
    m.inputs = {o->test};
    std::optional<data::Lexicon> lexicon;
    std::vector<train::EvalReport> reports;
    std::vector<model::Checkpoint> ckpts;
    for (const auto& path : o->ckpts) {
      ckpts.push_back(model::load_checkpoint(path));
      m.inputs.push_back(path);
      const bool trans = std::count(fields.begin(), fields.end(), InputField::trans) != 0;
      if (!lexicon && needs_lexicon(ckpts.back().model.config.variant, trans)) {
        lexicon = data::Lexicon::load(o->lexicon);
        m.inputs.push_back(o->lexicon);
      }
      reports.push_back(train::evaluate(ckpts.back(), test, fields, lexicon ? &*lexicon : nullptr, opts));
      if (ckpts.back().meta.contains("seed")) m.seeds.push_back(ckpts.back().meta["seed"].get<std::uint64_t>());
    }
    const auto report = reports.size() == 1 ? reports.front() : train::average_reports(reports);
    std::printf("%s", train::render_table({report}).c_str());
    if (o->out.empty()) {
      std::printf("%s\n", report.to_json().dump(2).c_str());
    } else {
      write_file(o->out, report.to_json().dump(2) + "\n");
      m.outputs.push_back(o->out);
    }

    if (!o->preds.empty()) {
      const auto& f = report.asr ? *report.asr : *report.trans;
      std::string text;
      for (std::size_t i = 0; i < test.size(); ++i) text += test[i].id + "\t" + report.classes[f.predictions[i]] + "\n";
      write_file(o->preds, text);
      m.outputs.push_back(o->preds);
    }

    if (!o->trace.empty()) {
      const auto& ck = ckpts.front();
      if (!model::uses_attention(ck.model.config.variant))
        throw SchemaError("--trace: variant " + model::to_string(ck.model.config.variant) + " has no attention");
      auto it = std::find_if(test.begin(), test.end(), [&](const auto& ex) { return ex.id == o->trace; });
      if (it == test.end()) throw SchemaError("--trace: no example with id '" + o->trace + "'");
      const InputField field = fields.back();
      std::map<std::string, std::size_t> classes;
      for (std::size_t i = 0; i < ck.classes.size(); ++i) classes[ck.classes[i]] = i;
      const auto prepared = train::prepare_example(*it, field, ck.model.config, ck.text_vocab, ck.phoneme_vocab,
                                                   classes, lexicon ? &*lexicon : nullptr, 1);
      const auto& input = prepared.inputs.front();
      auto pred = model::predict(ck.model, input, true);
      auto trace = *pred.trace;
      for (int id : input.text) trace.words.push_back(ck.text_vocab.token(id));
      for (int id : input.phonemes) trace.phonemes.push_back(ck.phoneme_vocab.token(id));
      nlohmann::ordered_json j;
      j["id"] = it->id;
      j["field"] = model::to_string(field);
      j["label"] = it->label;
      j["predicted"] = ck.classes[pred.label];
      j["trace"] = nn::to_json(trace);
      if (o->trace_out.empty()) {
        std::printf("%s\n", j.dump(2).c_str());
      } else {
        write_file(o->trace_out, j.dump(2) + "\n");
        m.outputs.push_back(o->trace_out);
      }
    }
    if (!o->out.empty()) m.write(o->out + ".manifest.json");
    rc = kOk;
  });
}

void add_gradcheck(CLI::App& app, int& rc) {
  struct Opts {
    std::string variant = "CASLU";
    double eps = 1e-5;
    double threshold = 1e-4;
    std::uint64_t seed = 1;
    bool planted_bug = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gradcheck", "64-bit finite-difference gradient check of a small model");
  cmd->add_option("--variant", o->variant, "Variant tag, or 'all'")->capture_default_str();
  cmd->add_option("--eps", o->eps, "Central-difference step")->capture_default_str();
  cmd->add_option("--threshold", o->threshold, "Maximum relative error")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed of the random instance")->capture_default_str();
  cmd->add_flag("--planted-bug", o->planted_bug, "Corrupt one backward rule (negative control)");
  cmd->callback([o, &rc] {
    std::vector<Variant> variants;
    if (o->variant == "all") variants.assign(std::begin(model::kAllVariants), std::end(model::kAllVariants));
    else variants = {model::variant_from_string(o->variant)};
    bool ok = true;
    for (Variant v : variants) {
      const auto r = model::gradcheck_variant(v, {o->eps, o->seed, o->planted_bug});
      const bool pass = r.result.max_rel_error < o->threshold;
      ok = ok && pass;
      std::printf("%s %s max relative error %.3e (over |a|+|n| >= 1e-6: %.3e; max abs error below: %.3e)\n",
                  pass ? "PASS" : "FAIL", model::to_string(v).c_str(), r.result.max_rel_error,
                  r.result.max_rel_error_conditioned, r.result.max_abs_error_small);
      for (const auto& [group, err] : r.groups) std::printf("  %-22s %.3e\n", group.c_str(), err);
    }
    rc = ok ? kOk : kCheckFailed;
  });
}

namespace {

std::map<std::string, std::string> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open file", 0, path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw SchemaError("expected id<TAB>label", lineno, path);
    if (!out.emplace(line.substr(0, tab), line.substr(tab + 1)).second)
      throw SchemaError("duplicate id '" + line.substr(0, tab) + "'", lineno, path);
  }
  return out;
}

}  // namespace

void add_signtest(CLI::App& app, int& rc) {
  struct Opts {
    std::string a, b, labels;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("signtest", "Paired sign test between two prediction files");
  cmd->add_option("--preds-a", o->a, "id<TAB>label predictions of system A")->required();
  cmd->add_option("--preds-b", o->b, "id<TAB>label predictions of system B")->required();
  cmd->add_option("--labels", o->labels, "Gold labels: dataset JSONL or id<TAB>label")->required();
  cmd->callback([o, &rc] {
    std::map<std::string, std::string> gold;
    if (o->labels.size() > 6 && o->labels.substr(o->labels.size() - 6) == ".jsonl") {
      for (const auto& ex : data::load_dataset(o->labels)) gold[ex.id] = ex.label;
    } else {
      gold = read_pairs(o->labels);
    }
    const auto a = read_pairs(o->a), b = read_pairs(o->b);
    std::map<std::string, std::size_t> ids;
    auto code = [&](const std::string& label) { return ids.emplace(label, ids.size()).first->second; };
    std::vector<std::size_t> pa, pb, y;
    for (const auto& [id, label] : gold) {
      auto ia = a.find(id), ib = b.find(id);
      if (ia == a.end() || ib == b.end()) throw SchemaError("example '" + id + "' is missing from a prediction file");
      y.push_back(code(label));
      pa.push_back(code(ia->second));
      pb.push_back(code(ib->second));
    }
    if (a.size() != gold.size() || b.size() != gold.size())
      throw SchemaError("prediction files list examples that are not in --labels");
    const auto r = train::sign_test(pa, pb, y);
    std::printf("examples %zu\nA correct, B wrong %zu\nB correct, A wrong %zu\np-value %.6g\n", y.size(), r.a_only,
                r.b_only, r.p_value);
    rc = kOk;
  });
}

}  // namespace caslu::cli

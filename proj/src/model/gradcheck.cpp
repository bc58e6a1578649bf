#include "caslu/model/gradcheck.hpp"

namespace caslu::model {

ModelConfig gradcheck_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.text_vocab = 12;
  c.phoneme_vocab = 10;
  c.num_classes = 3;
  c.text_dim = 4;
  c.phoneme_dim = 4;
  c.hidden = 3;
  c.max_len_text = 6;
  c.max_len_phoneme = 9;
  c.init_range = 1.0;
  return c;
}

namespace {

ModelInput random_input(Rng& rng, const ModelConfig& c) {
  ModelInput in;
  for (std::size_t i = 0, n = 1 + rng.index(c.max_len_text); i < n; ++i)
    in.text.push_back(1 + static_cast<int>(rng.index(c.text_vocab - 1)));
  for (std::size_t i = 0, n = 1 + rng.index(c.max_len_phoneme); i < n; ++i)
    in.phonemes.push_back(1 + static_cast<int>(rng.index(c.phoneme_vocab - 1)));
  return in;
}

std::string group_of(const std::string& name) {
  const auto first = name.find('.');
  if (first == std::string::npos) return name;
  if (name.compare(0, first, "attention") == 0) return name;
  const auto second = name.find('.', first + 1);
  return second == std::string::npos ? name : name.substr(0, second);
}

struct PlantedBugScope {
  explicit PlantedBugScope(bool on) : on_(on) {
    if (on_) ad::debug::set_planted_bug(true);
  }
  ~PlantedBugScope() {
    if (on_) ad::debug::set_planted_bug(false);
  }
  bool on_;
};

}  // namespace

VariantGradCheck gradcheck_variant(Variant v, const VariantGradCheckOptions& options) {
  const ModelConfig c = gradcheck_config(v);
  Model<double> m = init_model<double>(c, derive_seed(options.seed, "init"));
  Rng rng(derive_seed(options.seed, "gradcheck"));
  for (const char* k : {"attention.k_text", "attention.k_phoneme"})
    if (m.params.contains(k))
      for (auto& x : m.params[k].data) x = rng.uniform(-1, 1);
  const ModelInput a = random_input(rng, c), b = random_input(rng, c), a2 = random_input(rng, c);

  auto loss = [&](Bound<double>& bound) {
    auto& t = bound.tape();
    if (v == Variant::caslu_vat)
      return t.add(vat_loss(bound, c, a, a2, 0, 1.0, false), vat_loss(bound, c, b, a, 2, 1.0, false));
    if (v == Variant::caslu_nbest)
      return t.add(classification_loss(t, nbest_forward(bound, c, {a, b}, 2).logits, 0),
                   classification_loss(t, nbest_forward(bound, c, {b, a2}, 2).logits, 1));
    return t.add(classification_loss(t, forward(bound, c, a).logits, 0),
                 classification_loss(t, forward(bound, c, b).logits, 2));
  };

  const std::vector<std::string>& names = m.params.names();
  std::vector<Tensor<double>> init;
  for (std::size_t i = 0; i < m.params.size(); ++i) init.push_back(m.params.at(i));
  ad::Objective f = [&](const std::vector<Tensor<double>>& vals, std::vector<Tensor<double>>* grads) {
    ParamSet<double> p;
    for (std::size_t i = 0; i < vals.size(); ++i) p.add(names[i], vals[i]);
    ParamSet<double> g = p.zeros_like();
    Tape<double> tape;
    Bound<double> bound(tape, p, grads ? &g : nullptr);
    Var l = loss(bound);
    if (grads) {
      tape.backward(l);
      for (std::size_t i = 0; i < vals.size(); ++i) (*grads)[i] = g.at(i);
    }
    return tape.scalar(l);
  };

  VariantGradCheck out;
  out.variant = v;
  {
    PlantedBugScope scope(options.planted_bug);
    out.result = ad::grad_check(f, init, options.eps);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string g = group_of(names[i]);
    if (out.groups.empty() || out.groups.back().first != g) out.groups.emplace_back(g, 0.0);
    out.groups.back().second = std::max(out.groups.back().second, out.result.per_param[i]);
  }
  return out;
}

}  // namespace caslu::model

#include "caslu/nn/encoders.hpp"

#include <algorithm>

namespace caslu::nn {

std::string to_string(EncoderArch arch) {
  switch (arch) {
    case EncoderArch::lstm: return "lstm";
    case EncoderArch::gru: return "gru";
    case EncoderArch::bilstm: return "bilstm";
    case EncoderArch::bigru: return "bigru";
    case EncoderArch::cnn: return "cnn";
  }
  return "?";
}

EncoderArch encoder_arch_from_string(const std::string& s) {
  for (auto a : {EncoderArch::lstm, EncoderArch::gru, EncoderArch::bilstm, EncoderArch::bigru, EncoderArch::cnn})
    if (to_string(a) == s) return a;
  throw ContractError("unknown encoder architecture '" + s + "'");
}

namespace {

bool is_gru(EncoderArch a) { return a == EncoderArch::gru || a == EncoderArch::bigru; }
bool is_bidirectional(EncoderArch a) { return a == EncoderArch::bilstm || a == EncoderArch::bigru; }

template <typename T>
void add_recurrent(ParamSet<T>& params, const std::string& prefix, std::size_t in, std::size_t hidden, bool gru,
                   Rng& rng, double range) {
  const std::size_t g = (gru ? 3 : 4) * hidden;
  params.add(prefix + ".w_ih", uniform_tensor<T>({in, g}, rng, -range, range));
  params.add(prefix + ".w_hh", uniform_tensor<T>({hidden, g}, rng, -range, range));
  params.add(prefix + ".b_ih", Tensor<T>({1, g}));
  if (gru) params.add(prefix + ".b_hh", Tensor<T>({1, g}));
}

template <typename T>
LstmState lstm_cell(Tape<T>& tape, Var projected, LstmState s, const RecurrentWeights& w) {
  const std::size_t H = w.hidden;
  Var gates = tape.add(tape.add(projected, tape.matmul(s.h, w.w_hh)), w.b_ih);
  Var i = tape.sigmoid(tape.slice_cols(gates, 0, H));
  Var f = tape.sigmoid(tape.slice_cols(gates, H, H));
  Var g = tape.tanh(tape.slice_cols(gates, 2 * H, H));
  Var o = tape.sigmoid(tape.slice_cols(gates, 3 * H, H));
  Var c = tape.add(tape.mul(f, s.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

template <typename T>
Var gru_cell(Tape<T>& tape, Var projected, Var h, const RecurrentWeights& w) {
  const std::size_t H = w.hidden;
  Var xp = tape.add(projected, w.b_ih);
  Var hp = tape.add(tape.matmul(h, w.w_hh), w.b_hh);
  Var r = tape.sigmoid(tape.add(tape.slice_cols(xp, 0, H), tape.slice_cols(hp, 0, H)));
  Var z = tape.sigmoid(tape.add(tape.slice_cols(xp, H, H), tape.slice_cols(hp, H, H)));
  Var n = tape.tanh(tape.add(tape.slice_cols(xp, 2 * H, H), tape.mul(r, tape.slice_cols(hp, 2 * H, H))));
  return tape.add(tape.mul(tape.one_minus(z), h), tape.mul(z, n));
}

template <typename T>
void check_weights(Tape<T>& tape, Var x, const RecurrentWeights& w, std::size_t gates, const char* what) {
  if (tape.rows(x) != 1) throw DimensionError(std::string(what) + ": input must be a single row");
  const std::size_t g = gates * w.hidden;
  if (tape.rows(w.w_ih) != tape.cols(x) || tape.cols(w.w_ih) != g || tape.rows(w.w_hh) != w.hidden ||
      tape.cols(w.w_hh) != g)
    throw DimensionError(std::string(what) + ": weight shapes inconsistent with input width " +
                         std::to_string(tape.cols(x)) + " and hidden width " + std::to_string(w.hidden));
}

// Runs one direction over positions [0, n) (reversed when `backward`) and
// returns the n x H outputs in position order.
template <typename T>
Var run_direction(Tape<T>& tape, Var inputs, std::size_t n, const RecurrentWeights& w, bool gru, bool backward) {
  const std::size_t H = w.hidden;
  Var projected = tape.matmul(inputs, w.w_ih);  // n x G*H
  Var zero = tape.constant(1, H, std::vector<T>(H, T(0)));
  std::vector<Var> outputs(n);
  LstmState state{zero, zero};
  Var h = zero;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t pos = backward ? n - 1 - step : step;
    Var row = tape.slice_rows(projected, pos, 1);
    if (gru) {
      h = gru_cell(tape, row, h, w);
      outputs[pos] = h;
    } else {
      state = lstm_cell(tape, row, state, w);
      outputs[pos] = state.h;
    }
  }
  return tape.concat_rows(outputs);
}

template <typename T>
Var pad_rows(Tape<T>& tape, Var real, std::size_t total) {
  const std::size_t n = tape.rows(real);
  if (n == total) return real;
  const std::size_t D = tape.cols(real);
  Var parts[] = {real, tape.constant(total - n, D, std::vector<T>((total - n) * D, T(0)))};
  return tape.concat_rows(parts);
}

}  // namespace

std::size_t output_width(const EncoderConfig& cfg) {
  switch (cfg.arch) {
    case EncoderArch::lstm:
    case EncoderArch::gru: return cfg.hidden;
    case EncoderArch::bilstm:
    case EncoderArch::bigru: return 2 * cfg.hidden;
    case EncoderArch::cnn: return cfg.cnn_filters * cfg.cnn_widths.size();
  }
  return 0;
}

template <typename T>
void add_encoder_params(ParamSet<T>& params, const std::string& prefix, const EncoderConfig& cfg, Rng& rng,
                        double range) {
  if (cfg.arch == EncoderArch::cnn) {
    for (std::size_t w : cfg.cnn_widths) {
      const std::string p = prefix + ".conv" + std::to_string(w);
      params.add(p + ".w", uniform_tensor<T>({w * cfg.input_dim, cfg.cnn_filters}, rng, -range, range));
      params.add(p + ".b", Tensor<T>({1, cfg.cnn_filters}));
    }
    return;
  }
  const bool gru = is_gru(cfg.arch);
  add_recurrent(params, prefix + ".fwd", cfg.input_dim, cfg.hidden, gru, rng, range);
  if (is_bidirectional(cfg.arch)) add_recurrent(params, prefix + ".bwd", cfg.input_dim, cfg.hidden, gru, rng, range);
}

template <typename T>
RecurrentWeights bind_recurrent(Bound<T>& bound, const std::string& prefix, std::size_t hidden, bool gru) {
  RecurrentWeights w;
  w.w_ih = bound(prefix + ".w_ih");
  w.w_hh = bound(prefix + ".w_hh");
  w.b_ih = bound(prefix + ".b_ih");
  if (gru) w.b_hh = bound(prefix + ".b_hh");
  w.hidden = hidden;
  return w;
}

template <typename T>
LstmState lstm_step(Tape<T>& tape, Var x, LstmState state, const RecurrentWeights& w) {
  check_weights(tape, x, w, 4, "lstm_step");
  return lstm_cell(tape, tape.matmul(x, w.w_ih), state, w);
}

template <typename T>
Var gru_step(Tape<T>& tape, Var x, Var h, const RecurrentWeights& w) {
  check_weights(tape, x, w, 3, "gru_step");
  return gru_cell(tape, tape.matmul(x, w.w_ih), h, w);
}

std::size_t prefix_length(const Mask& mask) {
  const std::size_t n = static_cast<std::size_t>(std::find(mask.begin(), mask.end(), 0) - mask.begin());
  const bool tail = std::any_of(mask.begin() + static_cast<std::ptrdiff_t>(n), mask.end(), [](auto m) { return m != 0; });
  if (n == 0 && !tail) throw DegenerateMaskError("sequence is entirely padding");
  if (tail) throw ContractError("mask must be a run of real positions followed by padding");
  return n;
}

template <typename T>
EncodedSequence encode(Bound<T>& bound, const std::string& prefix, Var embedded, const Mask& mask,
                       const EncoderConfig& cfg) {
  Tape<T>& tape = bound.tape();
  const std::size_t L = tape.rows(embedded);
  if (mask.size() != L) throw DimensionError("encode: mask length does not match sequence length");
  if (L > cfg.max_len)
    throw DimensionError("encode: sequence length " + std::to_string(L) + " exceeds maximum " +
                         std::to_string(cfg.max_len));
  if (tape.cols(embedded) != cfg.input_dim)
    throw DimensionError("encode: input width " + std::to_string(tape.cols(embedded)) + " != configured " +
                         std::to_string(cfg.input_dim));
  const std::size_t n = prefix_length(mask);

  if (cfg.arch == EncoderArch::cnn) {
    std::vector<Var> maps;
    for (std::size_t w : cfg.cnn_widths) {
      const std::string p = prefix + ".conv" + std::to_string(w);
      Var unfolded = tape.unfold_rows(embedded, w, (w - 1) / 2);
      Var z = tape.add(tape.matmul(unfolded, bound(p + ".w")), tape.tile_rows(bound(p + ".b"), L));
      maps.push_back(tape.tanh(z));
    }
    return {tape.mask_rows(tape.concat_cols(maps), mask), mask};
  }

  const bool gru = is_gru(cfg.arch);
  Var real = tape.slice_rows(embedded, 0, n);
  Var fwd = run_direction(tape, real, n, bind_recurrent(bound, prefix + ".fwd", cfg.hidden, gru), gru, false);
  if (!is_bidirectional(cfg.arch)) return {pad_rows(tape, fwd, L), mask};
  Var bwd = run_direction(tape, real, n, bind_recurrent(bound, prefix + ".bwd", cfg.hidden, gru), gru, true);
  Var both[] = {fwd, bwd};
  return {pad_rows(tape, tape.concat_cols(both), L), mask};
}

#define CASLU_INSTANTIATE(T)                                                                                     \
  template void add_encoder_params<T>(ParamSet<T>&, const std::string&, const EncoderConfig&, Rng&, double);    \
  template RecurrentWeights bind_recurrent<T>(Bound<T>&, const std::string&, std::size_t, bool);               \
  template LstmState lstm_step<T>(Tape<T>&, Var, LstmState, const RecurrentWeights&);                           \
  template Var gru_step<T>(Tape<T>&, Var, Var, const RecurrentWeights&);                                        \
  template EncodedSequence encode<T>(Bound<T>&, const std::string&, Var, const Mask&, const EncoderConfig&);

CASLU_INSTANTIATE(float)
CASLU_INSTANTIATE(double)

#undef CASLU_INSTANTIATE

}  // namespace caslu::nn

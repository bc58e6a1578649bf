#pragma once

// Reverse-mode automatic differentiation over 2-D values.
//
// A Tape is an append-only list of nodes; every op records its output value
// and a backward rule that pushes the output gradient into its inputs. Inputs
// always precede outputs, so backward is a single reverse sweep. No op
// broadcasts implicitly; shapes must match exactly (tile_rows is the explicit
// alternative).

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "caslu/autodiff/tensor.hpp"

namespace caslu::ad {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

namespace debug {
// Negative control for the gradient checker: corrupts the sigmoid backward
// rule while set. Never enabled outside verification runs.
void set_planted_bug(bool on);
bool planted_bug();
// When on, every op output is scanned for NaN/Inf (NumericError on failure).
void set_finite_checks(bool on);
bool finite_checks();
}  // namespace debug

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape();

  // Leaves.
  Var constant(std::size_t rows, std::size_t cols, std::vector<T> values);
  Var constant(const Tensor<T>& t);
  Var leaf(const Tensor<T>& t, bool requires_grad = true);
  // Borrowed storage (a model parameter). The gradient is added into `sink`
  // (same length) at the end of backward; a null sink keeps it on the tape.
  Var parameter(const T* data, std::size_t rows, std::size_t cols, T* sink, bool requires_grad = true);
  // Embedding lookup: row i of the output is table[ids[i]], or zero where the
  // mask is off. Backward scatters into the sink rows.
  Var gather_rows(const T* table, std::size_t table_rows, std::size_t cols, std::span<const int> ids,
                  const Mask& mask, T* sink);

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  // Elementwise.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T s);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  // 1 - a
  Var one_minus(Var a);

  // Reductions and reshaping.
  Var sum(Var a);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var tile_rows(Var row, std::size_t times);
  // Zeroes rows whose mask entry is 0; the gradient is blocked there too.
  Var mask_rows(Var a, const Mask& mask);
  // Row i of the output holds rows [i - pad_left, i - pad_left + width) of a,
  // flattened, with zeros outside the valid range (1-D convolution unfold).
  Var unfold_rows(Var a, std::size_t width, std::size_t pad_left);

  // Normalizations.
  // Softmax over all elements of a vector-shaped value restricted to active
  // mask positions; masked outputs are exactly 0.
  Var masked_softmax(Var logits, const Mask& mask);
  Var log_softmax(Var row);
  // -log softmax(logits)[label] for a 1xK row.
  Var cross_entropy(Var logits, std::size_t label);
  // Each row divided by max(||row||_2, eps).
  Var normalize_rows(Var a, T eps);

  // Arbitrary op with a caller-supplied backward rule.
  Var custom(std::vector<std::size_t> inputs, std::size_t rows, std::size_t cols, std::vector<T> value,
             Backward backward);

  void backward(Var loss);

  // Inspection.
  std::size_t size() const { return nodes_.size(); }
  std::size_t rows(Var v) const { return node(v).rows; }
  std::size_t cols(Var v) const { return node(v).cols; }
  std::span<const T> value(Var v) const;
  T scalar(Var v) const;
  Tensor<T> tensor(Var v) const;
  bool requires_grad(Var v) const { return node(v).needs_grad; }
  // Gradient after backward; zeros for unreached nodes.
  Tensor<T> grad(Var v) const;

  // Backward-rule helpers.
  std::span<const T> grad_span(std::size_t id) const { return nodes_[id].grad; }
  // Gradient buffer of an input, allocated zeroed on first use; null when the
  // input does not require a gradient.
  T* grad_buffer(std::size_t id);

 private:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<T> own;
    const T* ext = nullptr;
    std::vector<T> grad;
    T* sink = nullptr;
    bool needs_grad = false;
    Backward backward;
    const T* data() const { return ext ? ext : own.data(); }
  };

  const Node& node(Var v) const;
  Var push(std::size_t rows, std::size_t cols, std::vector<T> value, bool needs_grad, Backward backward);
  bool any_grad(std::initializer_list<Var> vs) const;
  void same_shape(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  bool check_finite_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace caslu::ad

#include "caslu/autodiff/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "caslu/kernels/kernels.hpp"

namespace caslu::ad {

namespace debug {
namespace {
std::atomic<bool> g_planted_bug{false};
std::atomic<bool> g_finite_checks{false};
}  // namespace
void set_planted_bug(bool on) { g_planted_bug = on; }
bool planted_bug() { return g_planted_bug; }
void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks() { return g_finite_checks; }
}  // namespace debug

namespace {

std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

std::size_t active_count(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

}  // namespace

template <typename T>
Tape<T>::Tape() : check_finite_(debug::finite_checks()) {
  nodes_.reserve(256);
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

template <typename T>
Var Tape<T>::push(std::size_t rows, std::size_t cols, std::vector<T> value, bool needs_grad, Backward backward) {
  if (check_finite_) {
    for (T x : value)
      if (!std::isfinite(x)) throw NumericError("non-finite value produced by op #" + std::to_string(nodes_.size()));
  }
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.own = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
bool Tape<T>::any_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs)
    if (node(v).needs_grad) return true;
  return false;
}

template <typename T>
void Tape<T>::same_shape(Var a, Var b, const char* op) const {
  const Node& x = node(a);
  const Node& y = node(b);
  if (x.rows != y.rows || x.cols != y.cols)
    throw DimensionError(std::string(op) + ": shape mismatch " + dims(x.rows, x.cols) + " vs " + dims(y.rows, y.cols));
}

template <typename T>
T* Tape<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad.assign(n.rows * n.cols, T(0));
  return n.grad.data();
}

template <typename T>
std::span<const T> Tape<T>::value(Var v) const {
  const Node& n = node(v);
  return {n.data(), n.rows * n.cols};
}

template <typename T>
T Tape<T>::scalar(Var v) const {
  const Node& n = node(v);
  if (n.rows * n.cols != 1) throw DimensionError("scalar(): value is " + dims(n.rows, n.cols));
  return n.data()[0];
}

template <typename T>
Tensor<T> Tape<T>::tensor(Var v) const {
  const Node& n = node(v);
  return Tensor<T>({n.rows, n.cols}, std::vector<T>(n.data(), n.data() + n.rows * n.cols));
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor<T>({n.rows, n.cols});
  return Tensor<T>({n.rows, n.cols}, n.grad);
}

// ---------------------------------------------------------------- leaves

template <typename T>
Var Tape<T>::constant(std::size_t rows, std::size_t cols, std::vector<T> values) {
  if (values.size() != rows * cols) throw DimensionError("constant: data does not match " + dims(rows, cols));
  return push(rows, cols, std::move(values), false, nullptr);
}

template <typename T>
Var Tape<T>::constant(const Tensor<T>& t) {
  return constant(t.rows(), t.cols(), t.data);
}

template <typename T>
Var Tape<T>::leaf(const Tensor<T>& t, bool requires_grad) {
  return push(t.rows(), t.cols(), t.data, requires_grad, [](Tape&, std::size_t) {});
}

template <typename T>
Var Tape<T>::parameter(const T* data, std::size_t rows, std::size_t cols, T* sink, bool requires_grad) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.ext = data;
  n.sink = requires_grad ? sink : nullptr;
  n.needs_grad = requires_grad;
  if (requires_grad) n.backward = [](Tape&, std::size_t) {};
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::gather_rows(const T* table, std::size_t table_rows, std::size_t cols, std::span<const int> ids,
                         const Mask& mask, T* sink) {
  if (mask.size() != ids.size()) throw DimensionError("gather_rows: mask length does not match ids");
  std::vector<T> out(ids.size() * cols, T(0));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table_rows)
      throw ContractError("embedding id " + std::to_string(ids[i]) + " out of range [0, " +
                          std::to_string(table_rows) + ")");
    if (!mask[i]) continue;
    std::copy_n(table + static_cast<std::size_t>(ids[i]) * cols, cols, out.begin() + i * cols);
  }
  const bool needs = sink != nullptr;
  std::vector<int> saved(ids.begin(), ids.end());
  return push(ids.size(), cols, std::move(out), needs, [saved, mask, cols, sink](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      if (!mask[i]) continue;
      T* dst = sink + static_cast<std::size_t>(saved[i]) * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += g[i * cols + c];
    }
  });
}

// ---------------------------------------------------------- linear algebra

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const Node& x = node(a);
  const Node& y = node(b);
  if (x.cols != y.rows)
    throw DimensionError("matmul: inner dimensions disagree, " + dims(x.rows, x.cols) + " * " + dims(y.rows, y.cols));
  const std::size_t m = x.rows, k = x.cols, n = y.cols;
  std::vector<T> out(m * n);
  kernels::gemm_nn(m, k, n, x.data(), y.data(), out.data(), false);
  return push(m, n, std::move(out), any_grad({a, b}), [a, b, m, k, n](Tape& t, std::size_t self) {
    const T* g = t.grad_span(self).data();
    if (T* ga = t.grad_buffer(a.id)) kernels::gemm_nt(m, n, k, g, t.nodes_[b.id].data(), ga, true);
    if (T* gb = t.grad_buffer(b.id)) kernels::gemm_tn(k, m, n, t.nodes_[a.id].data(), g, gb, true);
  });
}

template <typename T>
Var Tape<T>::transpose(Var a) {
  const Node& x = node(a);
  const std::size_t r = x.rows, c = x.cols;
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.data()[i * c + j];
  return push(c, r, std::move(out), any_grad({a}), [a, r, c](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

// ------------------------------------------------------------- elementwise

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  same_shape(a, b, "add");
  const Node& x = node(a);
  const Node& y = node(b);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + y.data()[i];
  return push(x.rows, x.cols, std::move(out), any_grad({a, b}), [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    if (T* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (T* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
  same_shape(a, b, "sub");
  const Node& x = node(a);
  const Node& y = node(b);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] - y.data()[i];
  return push(x.rows, x.cols, std::move(out), any_grad({a, b}), [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    if (T* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (T* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  same_shape(a, b, "mul");
  const Node& x = node(a);
  const Node& y = node(b);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * y.data()[i];
  return push(x.rows, x.cols, std::move(out), any_grad({a, b}), [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* xa = t.nodes_[a.id].data();
    const T* xb = t.nodes_[b.id].data();
    if (T* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * xb[i];
    if (T* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
  });
}

template <typename T>
Var Tape<T>::scale(Var a, T s) {
  const Node& x = node(a);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * x.data()[i];
  return push(x.rows, x.cols, std::move(out), any_grad({a}), [a, s](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

template <typename T>
Var Tape<T>::one_minus(Var a) {
  const Node& x = node(a);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) - x.data()[i];
  return push(x.rows, x.cols, std::move(out), any_grad({a}), [a](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
  });
}

template <typename T>
Var Tape<T>::tanh(Var a) {
  const Node& x = node(a);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
  return push(x.rows, x.cols, std::move(out), any_grad({a}), [a](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* y = t.nodes_[self].data();
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var Tape<T>::sigmoid(Var a) {
  const Node& x = node(a);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    // Split on sign so exp never overflows.
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  const T factor = debug::planted_bug() ? T(1.5) : T(1);
  return push(x.rows, x.cols, std::move(out), any_grad({a}), [a, factor](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* y = t.nodes_[self].data();
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var Tape<T>::exp(Var a) {
  const Node& x = node(a);
  std::vector<T> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.data()[i]);
  return push(x.rows, x.cols, std::move(out), any_grad({a}), [a](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* y = t.nodes_[self].data();
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
  });
}

// ------------------------------------------------- reductions and reshaping

template <typename T>
Var Tape<T>::sum(Var a) {
  const Node& x = node(a);
  T s = T(0);
  for (std::size_t i = 0; i < x.rows * x.cols; ++i) s += x.data()[i];
  return push(1, 1, {s}, any_grad({a}), [a](Tape& t, std::size_t self) {
    const T g = t.grad_span(self)[0];
    T* ga = t.grad_buffer(a.id);
    const std::size_t n = t.nodes_[a.id].rows * t.nodes_[a.id].cols;
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

template <typename T>
Var Tape<T>::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Node& x = node(a);
  if (count == 0 || begin + count > x.rows)
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + dims(x.rows, x.cols));
  const std::size_t c = x.cols;
  std::vector<T> out(x.data() + begin * c, x.data() + (begin + count) * c);
  return push(count, c, std::move(out), any_grad({a}), [a, begin, c](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id) + begin * c;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var Tape<T>::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Node& x = node(a);
  if (count == 0 || begin + count > x.cols)
    throw DimensionError("slice_cols: cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + dims(x.rows, x.cols));
  const std::size_t r = x.rows, c = x.cols;
  std::vector<T> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(x.data() + i * c + begin, count, out.begin() + i * count);
  return push(r, count, std::move(out), any_grad({a}), [a, begin, count, r, c](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) ga[i * c + begin + j] += g[i * count + j];
  });
}

template <typename T>
Var Tape<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = node(parts[0]).cols;
  std::size_t r = 0;
  bool needs = false;
  for (Var p : parts) {
    if (node(p).cols != c) throw DimensionError("concat_rows: column counts differ");
    r += node(p).rows;
    needs = needs || node(p).needs_grad;
  }
  std::vector<T> out;
  out.reserve(r * c);
  for (Var p : parts) out.insert(out.end(), node(p).data(), node(p).data() + node(p).rows * c);
  std::vector<Var> saved(parts.begin(), parts.end());
  return push(r, c, std::move(out), needs, [saved](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    std::size_t offset = 0;
    for (Var p : saved) {
      const std::size_t n = t.nodes_[p.id].rows * t.nodes_[p.id].cols;
      if (T* gp = t.grad_buffer(p.id))
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      offset += n;
    }
  });
}

template <typename T>
Var Tape<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = node(parts[0]).rows;
  std::size_t c = 0;
  bool needs = false;
  for (Var p : parts) {
    if (node(p).rows != r) throw DimensionError("concat_cols: row counts differ");
    c += node(p).cols;
    needs = needs || node(p).needs_grad;
  }
  std::vector<T> out(r * c);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Node& x = node(p);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data() + i * x.cols, x.cols, out.begin() + i * c + offset);
    offset += x.cols;
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return push(r, c, std::move(out), needs, [saved, r, c](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    std::size_t offset = 0;
    for (Var p : saved) {
      const std::size_t pc = t.nodes_[p.id].cols;
      if (T* gp = t.grad_buffer(p.id))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * c + offset + j];
      offset += pc;
    }
  });
}

template <typename T>
Var Tape<T>::tile_rows(Var row, std::size_t times) {
  const Node& x = node(row);
  if (x.rows != 1) throw DimensionError("tile_rows: expected a single row, got " + dims(x.rows, x.cols));
  const std::size_t c = x.cols;
  std::vector<T> out(times * c);
  for (std::size_t i = 0; i < times; ++i) std::copy_n(x.data(), c, out.begin() + i * c);
  return push(times, c, std::move(out), any_grad({row}), [row, times, c](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* gr = t.grad_buffer(row.id);
    for (std::size_t i = 0; i < times; ++i)
      for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
  });
}

template <typename T>
Var Tape<T>::mask_rows(Var a, const Mask& mask) {
  const Node& x = node(a);
  if (mask.size() != x.rows) throw DimensionError("mask_rows: mask length does not match row count");
  const std::size_t c = x.cols;
  std::vector<T> out(x.data(), x.data() + x.rows * c);
  for (std::size_t i = 0; i < x.rows; ++i)
    if (!mask[i]) std::fill_n(out.begin() + i * c, c, T(0));
  return push(x.rows, c, std::move(out), any_grad({a}), [a, mask, c](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i])
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j];
  });
}

template <typename T>
Var Tape<T>::unfold_rows(Var a, std::size_t width, std::size_t pad_left) {
  const Node& x = node(a);
  const std::size_t L = x.rows, d = x.cols;
  if (width == 0 || pad_left >= width) throw DimensionError("unfold_rows: invalid window");
  std::vector<T> out(L * width * d, T(0));
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t w = 0; w < width; ++w) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + w) - static_cast<std::ptrdiff_t>(pad_left);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
      std::copy_n(x.data() + static_cast<std::size_t>(src) * d, d, out.begin() + (i * width + w) * d);
    }
  return push(L, width * d, std::move(out), any_grad({a}), [a, L, d, width, pad_left](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t w = 0; w < width; ++w) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + w) - static_cast<std::ptrdiff_t>(pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
        for (std::size_t j = 0; j < d; ++j) ga[static_cast<std::size_t>(src) * d + j] += g[(i * width + w) * d + j];
      }
  });
}

// ------------------------------------------------------------ normalizers

template <typename T>
Var Tape<T>::masked_softmax(Var logits, const Mask& mask) {
  const Node& x = node(logits);
  const std::size_t n = x.rows * x.cols;
  if (x.rows != 1 && x.cols != 1) throw DimensionError("masked_softmax: expected a vector, got " + dims(x.rows, x.cols));
  if (mask.size() != n) throw DimensionError("masked_softmax: mask length " + std::to_string(mask.size()) +
                                             " does not match " + std::to_string(n) + " logits");
  if (active_count(mask) == 0) throw DegenerateMaskError("masked_softmax: every position is masked");
  T hi = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) hi = std::max(hi, x.data()[i]);
  std::vector<T> out(n, T(0));
  T z = T(0);
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) z += (out[i] = std::exp(x.data()[i] - hi));
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
  return push(x.rows, x.cols, std::move(out), any_grad({logits}), [logits, n](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* y = t.nodes_[self].data();
    T dot = T(0);
    for (std::size_t i = 0; i < n; ++i) dot += y[i] * g[i];
    T* gx = t.grad_buffer(logits.id);
    // y is exactly 0 at masked positions, which blocks their gradient.
    for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (g[i] - dot);
  });
}

template <typename T>
Var Tape<T>::log_softmax(Var row) {
  const Node& x = node(row);
  const std::size_t n = x.rows * x.cols;
  if (x.rows != 1) throw DimensionError("log_softmax: expected a single row, got " + dims(x.rows, x.cols));
  const T hi = *std::max_element(x.data(), x.data() + n);
  T z = T(0);
  for (std::size_t i = 0; i < n; ++i) z += std::exp(x.data()[i] - hi);
  const T lse = hi + std::log(z);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x.data()[i] - lse;
  return push(1, n, std::move(out), any_grad({row}), [row, n](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* y = t.nodes_[self].data();
    T gs = T(0);
    for (std::size_t i = 0; i < n; ++i) gs += g[i];
    T* gx = t.grad_buffer(row.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] - std::exp(y[i]) * gs;
  });
}

template <typename T>
Var Tape<T>::cross_entropy(Var logits, std::size_t label) {
  const Node& x = node(logits);
  const std::size_t n = x.rows * x.cols;
  if (x.rows != 1) throw DimensionError("cross_entropy: expected a single row, got " + dims(x.rows, x.cols));
  if (label >= n)
    throw ContractError("cross_entropy: label " + std::to_string(label) + " out of range for " + std::to_string(n) +
                        " classes");
  const T hi = *std::max_element(x.data(), x.data() + n);
  T z = T(0);
  for (std::size_t i = 0; i < n; ++i) z += std::exp(x.data()[i] - hi);
  const T lse = hi + std::log(z);
  return push(1, 1, {lse - x.data()[label]}, any_grad({logits}), [logits, label, n, lse](Tape& t, std::size_t self) {
    const T g = t.grad_span(self)[0];
    const T* xv = t.nodes_[logits.id].data();
    T* gx = t.grad_buffer(logits.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += g * (std::exp(xv[i] - lse) - (i == label ? T(1) : T(0)));
  });
}

template <typename T>
Var Tape<T>::normalize_rows(Var a, T eps) {
  const Node& x = node(a);
  const std::size_t r = x.rows, c = x.cols;
  std::vector<T> out(r * c);
  std::vector<T> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < c; ++j) s += x.data()[i * c + j] * x.data()[i * c + j];
    norms[i] = std::sqrt(s);
    const T denom = std::max(norms[i], eps);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.data()[i * c + j] / denom;
  }
  return push(r, c, std::move(out), any_grad({a}), [a, r, c, norms, eps](Tape& t, std::size_t self) {
    auto g = t.grad_span(self);
    const T* y = t.nodes_[self].data();
    T* ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < r; ++i) {
      if (norms[i] > eps) {
        T dot = T(0);
        for (std::size_t j = 0; j < c; ++j) dot += y[i * c + j] * g[i * c + j];
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += (g[i * c + j] - y[i * c + j] * dot) / norms[i];
      } else {
        // Clamped denominator: y = x / eps is linear in x.
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] / eps;
      }
    }
  });
}

template <typename T>
Var Tape<T>::custom(std::vector<std::size_t> inputs, std::size_t rows, std::size_t cols, std::vector<T> value,
                    Backward backward) {
  if (value.size() != rows * cols) throw DimensionError("custom: value does not match " + dims(rows, cols));
  bool needs = false;
  for (std::size_t id : inputs) needs = needs || node(Var{id}).needs_grad;
  return push(rows, cols, std::move(value), needs, std::move(backward));
}

// ---------------------------------------------------------------- backward

template <typename T>
void Tape<T>::backward(Var loss) {
  const Node& l = node(loss);
  if (l.rows * l.cols != 1) throw DimensionError("backward: loss must be scalar, got " + dims(l.rows, l.cols));
  if (!l.needs_grad) throw ContractError("backward: loss is detached from every differentiable input");
  for (Node& n : nodes_) n.grad.clear();
  grad_buffer(loss.id)[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (!n.sink || n.grad.empty()) continue;
    for (std::size_t i = 0; i < n.grad.size(); ++i) n.sink[i] += n.grad[i];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace caslu::ad

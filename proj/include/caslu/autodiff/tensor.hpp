#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "caslu/util/error.hpp"

namespace caslu::ad {

using Shape = std::vector<std::size_t>;

// Binary position mask: 1 = real token, 0 = padding.
using Mask = std::vector<std::uint8_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

// Dense row-major array. Value type; participates in a graph only when bound
// to a Tape.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), T(0)) { check(); }
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) { check(); }

  std::size_t size() const { return data.size(); }
  // Matrix view: rank-1 tensors are a single row.
  std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }
  std::span<T> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape, std::vector<U>(data.begin(), data.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check() const {
    for (std::size_t e : shape)
      if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    if (data.size() != numel(shape))
      throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_str(shape));
  }
};

}  // namespace caslu::ad

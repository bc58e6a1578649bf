#pragma once

#include <map>
#include <string>
#include <vector>

#include "caslu/autodiff/tape.hpp"
#include "caslu/util/rng.hpp"

namespace caslu::nn {

using ad::Mask;
using ad::Tape;
using ad::Tensor;
using ad::Var;

// Ordered collection of named parameter tensors. The order is the
// registration order and is what checkpoints and optimizers iterate over.
template <typename T>
class ParamSet {
 public:
  std::size_t add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(value));
    return tensors_.size() - 1;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
  }
  Tensor<T>& operator[](const std::string& name) { return tensors_[index(name)]; }
  const Tensor<T>& operator[](const std::string& name) const { return tensors_[index(name)]; }
  Tensor<T>& at(std::size_t i) { return tensors_[i]; }
  const Tensor<T>& at(std::size_t i) const { return tensors_[i]; }

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  // Number of scalar parameters.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Tensor<T>(tensors_[i].shape));
    return out;
  }

  void fill_zero() {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), T(0));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  bool operator==(const ParamSet& o) const { return names_ == o.names_ && tensors_ == o.tensors_; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

// Parameters bound onto one tape. Each parameter becomes a leaf at most once;
// gradients flow into the matching tensor of `grads` when it is given.
template <typename T>
class Bound {
 public:
  Bound(Tape<T>& tape, const ParamSet<T>& params, ParamSet<T>* grads = nullptr)
      : tape_(tape), params_(params), grads_(grads) {}

  Tape<T>& tape() { return tape_; }
  const ParamSet<T>& params() const { return params_; }

  Var operator()(const std::string& name) {
    const std::size_t i = params_.index(name);
    auto it = cache_.find(i);
    if (it != cache_.end()) return it->second;
    const Tensor<T>& t = params_.at(i);
    Var v = tape_.parameter(t.data.data(), t.rows(), t.cols(), sink(i), grads_ != nullptr);
    cache_.emplace(i, v);
    return v;
  }

  // Embedding lookup through the table `name`; masked rows are zero.
  Var embed(const std::string& name, std::span<const int> ids, const Mask& mask) {
    const std::size_t i = params_.index(name);
    const Tensor<T>& t = params_.at(i);
    return tape_.gather_rows(t.data.data(), t.rows(), t.cols(), ids, mask, sink(i));
  }

 private:
  T* sink(std::size_t i) { return grads_ ? grads_->at(i).data.data() : nullptr; }

  Tape<T>& tape_;
  const ParamSet<T>& params_;
  ParamSet<T>* grads_;
  std::map<std::size_t, Var> cache_;
};

template <typename T>
Tensor<T> uniform_tensor(ad::Shape shape, Rng& rng, double lo, double hi) {
  Tensor<T> t(std::move(shape));
  for (auto& x : t.data) x = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace caslu::nn
